"""
URL configuration for the ghostfl simulator.

Only the admin is served, for browsing the run ledger.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]

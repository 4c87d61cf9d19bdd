from django.db import migrations, models


class Migration(migrations.Migration):

    dependencies = [
        ('experiments', '0001_initial'),
    ]

    operations = [
        migrations.AlterField(
            model_name='experimentrun',
            name='master_seed',
            field=models.DecimalField(decimal_places=0, default=0, max_digits=20),
        ),
    ]

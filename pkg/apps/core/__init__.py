"""
Core app - Shared abstractions and utilities.

This app provides:
- Domain error hierarchy (exceptions)
- Splittable seed derivation (seeding)
- Strict pydantic base schema (schemas)
- Task execution facade (TaskService)

The task facade allows switching between:
- Local development (sync execution)
- Celery + Redis (parallel sweep cells)
"""

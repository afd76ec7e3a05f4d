"""
Export all schemas from this module.
"""
from app.schemas.params import *  # noqa
from app.schemas.run import *  # noqa

"""
Configuration package for rustcrack
"""

from .constants import *

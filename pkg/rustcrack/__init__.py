"""
rustcrack: finite-element simulation of corrosion-induced cover cracking in
reinforced concrete.
"""
from dotenv import load_dotenv

load_dotenv()

__version__ = '1.0.0'

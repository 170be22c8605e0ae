# metriclab/__init__.py
from dotenv import load_dotenv

load_dotenv()

__version__ = "0.4.0"

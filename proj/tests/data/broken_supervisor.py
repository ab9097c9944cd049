"""Supervisor double that violates the report protocol."""
import sys

print("this is not a report")
sys.exit(3)

"""Empty __init__ file for tests package."""

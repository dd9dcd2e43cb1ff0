"""Empty __init__ file for integration tests."""

"""Just a placeholder to do relative imports"""
# Do not delete this file, it will cause errors.

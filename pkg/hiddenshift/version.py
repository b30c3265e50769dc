"""Represents current lab version"""
__version__ = (1, 0, 0)

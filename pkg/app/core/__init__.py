"""
Core package
""" 
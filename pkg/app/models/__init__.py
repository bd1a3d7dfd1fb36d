"""
Models package
""" 
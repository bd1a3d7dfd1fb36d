"""
Services package
""" 
"""
Artifact writers and console report templates
"""

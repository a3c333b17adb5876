"""
Command handlers: one module per CLI subcommand
"""

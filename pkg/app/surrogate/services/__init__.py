"""
Pipelines composing the numerical modules into complete analyses.
"""

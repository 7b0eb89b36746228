"""Querybot - question-to-SQL pipeline with keyword-driven entity retrieval"""

__version__ = "1.0.0"

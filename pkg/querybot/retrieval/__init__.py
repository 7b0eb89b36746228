"""Keyword-driven entity retrieval over a database catalog"""

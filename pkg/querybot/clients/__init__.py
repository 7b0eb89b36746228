"""Model clients: chat LLMs, embedders, mocks, and the response cache"""

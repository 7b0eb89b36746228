"""User question understanding: task decomposition and keyword extraction"""
from querybot.uqu.models import KeywordSet, NluRecord, TaskDecomposition, UserQuestion
from querybot.uqu.parser import parse_response, serialize_response
from querybot.uqu.understand import Understanding, understand
from querybot.uqu.dekeynlu import NluLoad, export_finetune, load_dekeynlu

__all__ = [
    "KeywordSet",
    "NluRecord",
    "TaskDecomposition",
    "UserQuestion",
    "parse_response",
    "serialize_response",
    "Understanding",
    "understand",
    "NluLoad",
    "export_finetune",
    "load_dekeynlu",
]

"""Metrics and reporting: EX, keyword F1, BLEU/ROUGE, judge calibration"""
from querybot.evaluation.calibration import CalibrationModel, calibrate, fit_calibration
from querybot.evaluation.execution import execution_accuracy
from querybot.evaluation.judge import judge_score
from querybot.evaluation.metrics import bleu, keyword_f1, rouge
from querybot.evaluation.report import ErrorCategory, ItemRecord, MetricReport, aggregate

__all__ = [
    "CalibrationModel",
    "calibrate",
    "fit_calibration",
    "execution_accuracy",
    "judge_score",
    "bleu",
    "keyword_f1",
    "rouge",
    "ErrorCategory",
    "ItemRecord",
    "MetricReport",
    "aggregate",
]

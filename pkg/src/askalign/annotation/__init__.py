from .store import (AnnotationError, AnnotationStore, AuthError,
                    McqValidationTask, RankingTask, ScreeningRecord,
                    SubmissionError)

__all__ = [
    "AnnotationError", "AnnotationStore", "AuthError", "McqValidationTask",
    "RankingTask", "ScreeningRecord", "SubmissionError",
]

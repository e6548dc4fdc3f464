from ._core import (
    CITATION_THRESHOLD,
    DroidRetrieverError,
    batch,
    metrics,
    parse_citations,
    replay_matches,
    report_statements,
    run,
    run_id,
    similarity,
    verify_trace,
)

__all__ = [
    "CITATION_THRESHOLD",
    "DroidRetrieverError",
    "batch",
    "metrics",
    "parse_citations",
    "replay_matches",
    "report_statements",
    "run",
    "run_id",
    "similarity",
    "verify_trace",
]

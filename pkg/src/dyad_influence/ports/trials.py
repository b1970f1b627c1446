from __future__ import annotations

from typing import Dict, List, Mapping, NamedTuple, Optional

from dyad_influence.domain.trials import TrialRecord


class UnreadableTrial(NamedTuple):
    dyad_id: str
    source: str
    error_type: str
    message: str


class SessionLoad(NamedTuple):
    trials: List[TrialRecord]
    unreadable: List[UnreadableTrial]


class TrialRepository:
    """Source and sink of recorded (or simulated) trials."""

    def list_trials(self) -> List[TrialRecord]:
        raise NotImplementedError

    def load_session(self) -> SessionLoad:
        """Readable trials plus the ones that failed to load, instead of failing on the first bad file."""
        return SessionLoad(self.list_trials(), [])

    def add(self, trial: TrialRecord, metadata: Optional[Mapping[str, str]] = None) -> None:
        raise NotImplementedError

    def session_metadata(self) -> Mapping[str, str]:
        raise NotImplementedError

    def metadata(self) -> Dict[str, Dict[str, str]]:
        """Extra per-trial entries (seeds, ground truth) stored alongside each trial."""
        raise NotImplementedError

    def set_session_metadata(self, entries: Mapping[str, str]) -> None:
        raise NotImplementedError

from __future__ import annotations

from typing import Dict, List, Mapping, Optional, Tuple

from dyad_influence.domain.trials import TrialRecord
from dyad_influence.ports.trials import TrialRepository


class InMemoryTrialRepository(TrialRepository):
    def __init__(self, trials: Optional[List[TrialRecord]] = None) -> None:
        self._storage: Dict[Tuple[str, str], TrialRecord] = {}
        self._metadata: Dict[Tuple[str, str], Dict[str, str]] = {}
        self._session: Dict[str, str] = {}
        for trial in trials or []:
            self.add(trial)

    def add(self, trial: TrialRecord, metadata: Optional[Mapping[str, str]] = None) -> None:
        key = (trial.dyad_id, trial.trial_id)
        self._storage[key] = trial
        self._metadata[key] = dict(metadata or {})

    def list_trials(self) -> List[TrialRecord]:
        return [self._storage[key] for key in sorted(self._storage)]

    def session_metadata(self) -> Mapping[str, str]:
        return dict(self._session)

    def metadata(self) -> Dict[str, Dict[str, str]]:
        return {f"{dyad}_{trial}.csv": dict(entry) for (dyad, trial), entry in sorted(self._metadata.items())}

    def set_session_metadata(self, entries: Mapping[str, str]) -> None:
        self._session.update({key: str(value) for key, value in entries.items()})

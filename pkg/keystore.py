import json
import os
import logging
from typing import Dict, List, Optional

from typestat import Sequence

logger = logging.getLogger(__name__)


class KeyStore:
    """
    Named secret keys in a JSON file: RM keys as 0-based permutation arrays,
    nested-code keys as coset-leader bitstrings.
    """

    def __init__(self, data_file='stegcap_keys.json'):
        self.data_file = data_file
        self.data = self._load_data()

    def _load_data(self) -> Dict:
        if os.path.exists(self.data_file):
            try:
                with open(self.data_file, 'r') as f:
                    data = json.load(f)
                # older files kept a flat name -> permutation map
                if 'rm' not in data and 'nested' not in data:
                    data = {'rm': {k: v for k, v in data.items() if isinstance(v, list)}, 'nested': {}}
                data.setdefault('rm', {})
                data.setdefault('nested', {})
                return data
            except (OSError, json.JSONDecodeError) as e:
                logger.error(f"❌ Could not read key store {self.data_file}: {e}")
                return {'rm': {}, 'nested': {}}
        return {'rm': {}, 'nested': {}}

    def _save_data(self):
        with open(self.data_file, 'w') as f:
            json.dump(self.data, f, indent=2)

    def put_rm_key(self, name: str, perm) -> None:
        perm = [int(p) for p in perm]
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"key '{name}' is not a 0-based permutation")
        self.data['rm'][name] = perm
        self._save_data()
        logger.info(f"✅ Stored RM key '{name}' (N={len(perm)})")

    def get_rm_key(self, name: str) -> Optional[List[int]]:
        return self.data['rm'].get(name)

    def put_coset_leader(self, name: str, leader: Sequence) -> None:
        if leader.alphabet_size != 2:
            raise ValueError(f"key '{name}' must be a bit sequence")
        self.data['nested'][name] = str(leader)
        self._save_data()
        logger.info(f"✅ Stored coset leader '{name}'")

    def get_coset_leader(self, name: str) -> Optional[Sequence]:
        bits = self.data['nested'].get(name)
        return Sequence.from_string(bits, 2) if bits is not None else None

    def remove_key(self, name: str) -> bool:
        removed = False
        for section in ('rm', 'nested'):
            if name in self.data[section]:
                del self.data[section][name]
                removed = True
        if removed:
            self._save_data()
        return removed

    def list_keys(self) -> Dict[str, List[str]]:
        return {section: sorted(self.data[section]) for section in ('rm', 'nested')}

"""Checkpoint directory scanning for resumable trial ensembles."""

import json
import os


class CheckpointError(Exception):
    pass


def unit_filename(unit):
    start, stop = unit
    return f"unit-{start:08d}-{stop:08d}.json"


def scan_checkpoints(checkpoint_path):
    """Scan checkpoint_path for parseable unit files.

    Returns a dict mapping (start, stop) to the unit's record list. Files
    that fail to parse are skipped (a run may have stopped mid-write; the
    unit is recomputed and the file overwritten).
    """
    if not os.path.isdir(checkpoint_path):
        return {}

    try:
        entries = sorted(os.listdir(checkpoint_path))
    except OSError:
        return {}

    results = {}
    for filename in entries:
        if not (filename.startswith('unit-') and filename.endswith('.json')):
            continue
        filepath = os.path.join(checkpoint_path, filename)
        try:
            with open(filepath, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError):
            continue  # partial write, recompute
        if is_unit_record(data):
            results[(data['start'], data['stop'])] = data['records']

    return results


def is_unit_record(data):
    """Return True if data is a finished unit with one record per trial in [start, stop)."""
    return (
        isinstance(data, dict)
        and isinstance(data.get('start'), int)
        and isinstance(data.get('stop'), int)
        and isinstance(data.get('records'), list)
        and len(data['records']) == data['stop'] - data['start']
    )


class UnitCheckpoint:
    """load/save of trial units under one directory, tagged with the config hash."""

    def __init__(self, path, config_hash):
        self.path = str(path)
        self.config_hash = config_hash
        self._found = None

    def load(self, unit):
        if self._found is None:
            self._found = {}
            tag_file = os.path.join(self.path, 'config.sha256')
            try:
                with open(tag_file, 'r', encoding='utf-8') as f:
                    matches = f.read().strip() == self.config_hash
            except OSError:
                matches = False
            if matches:
                self._found = scan_checkpoints(self.path)
        return self._found.get(tuple(unit))

    def save(self, unit, records):
        start, stop = unit
        try:
            os.makedirs(self.path, exist_ok=True)
            with open(os.path.join(self.path, 'config.sha256'), 'w', encoding='utf-8') as f:
                f.write(self.config_hash + '\n')
            with open(os.path.join(self.path, unit_filename(unit)), 'w', encoding='utf-8') as f:
                json.dump({'start': start, 'stop': stop, 'records': records}, f)
                f.write('\n')
        except OSError as e:
            raise CheckpointError(f"Cannot write checkpoint in '{self.path}': {e}")

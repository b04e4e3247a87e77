import pandas as pd
from guard.harness.report import write_json, write_csv

COLUMNS = ['check', 'index', 'lhs', 'rhs', 'slack', 'sigma', 'lipschitz', 'lambda1', 'violated']


def _concat(first, second):
    parts = [part for part in [first, second] if not part.empty]
    return pd.concat(parts, ignore_index=True) if parts else first.copy()


class BoundReport:
    """
    Collected results of the bound checks

    Attributes:
        records:    (pd.DataFrame) one row per checked instance with the columns
                    check, index, lhs, rhs, slack (rhs - lhs), sigma, lipschitz, lambda1, violated
        violations: (dict[str, int]) violation count per check
        summary:    (dict) aggregate figures (means, ratios, positivity rates)
        config_hash: (str) hash of the effective config
    """
    def __init__(self, records=None, violations=None, summary=None, config_hash=None):
        self.records = pd.DataFrame(columns=COLUMNS) if records is None else records[COLUMNS].reset_index(drop=True)
        self.violations = dict(violations or {})
        self.summary = dict(summary or {})
        self.config_hash = config_hash

    def add(self, check, rows, violations=None, summary=None, summary_key=None):
        """
        Appends the rows of one check; repeated calls for the same check accumulate
        :param check: (str) check name, also the key of its violation count
        :param rows: (list[dict]) records with the COLUMNS fields other than check
        :param violations: (int) violation count (defaults to the number of violated rows)
        :param summary: (dict) figures stored under summary[summary_key]
        :param summary_key: (str) summary entry name (defaults to check)
        """
        frame = pd.DataFrame([dict(row, check=check) for row in rows], columns=COLUMNS)
        frame['violated'] = frame['violated'].astype(bool)
        self.records = _concat(self.records, frame)
        count = int(frame['violated'].sum()) if violations is None else int(violations)
        self.violations[check] = self.violations.get(check, 0) + count
        if summary is not None:
            self.summary[summary_key or check] = summary
        return self

    def merge(self, other):
        merged = BoundReport(_concat(self.records, other.records), self.violations, self.summary,
                             self.config_hash or other.config_hash)
        for check, count in other.violations.items():
            merged.violations[check] = merged.violations.get(check, 0) + count
        merged.summary.update(other.summary)
        return merged

    def to_dict(self):
        return {
            'config_hash': self.config_hash,
            'violations': self.violations,
            'summary': self.summary,
            'records': self.records.astype(object).where(self.records.notna(), None).to_dict(orient='records'),
        }

    def to_json(self, path):
        write_json(path, self.to_dict())

    def to_csv(self, path):
        write_csv(self.records, path)

"""Dataset ingestion, synthetic data generation and on-disk formats.

File formats (see docs/format.md for the byte-level contract):

* ``profiles.csv`` -- header with field names; cells are raw category labels.
* ``truth.csv``    -- header ``identity``; one integer entity id per record.
* ``network.csv``  -- header ``i,j``; one 0-based edge per row with i < j.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractViolationError, IngestionError
from .model import LinkageState, Network, RecordTable, expit

__all__ = [
    "Dataset",
    "ScenarioSpec",
    "SCENARIOS",
    "load_profiles",
    "load_truth",
    "load_network",
    "synth_network",
    "synth_profiles",
    "make_rldata_replica",
    "write_bundle",
    "read_bundle",
]


@dataclass(frozen=True)
class Dataset:
    table: RecordTable
    field_names: tuple
    codebooks: tuple          # per field: tuple of labels, code -> label
    net: Network | None = None
    truth: LinkageState | None = None

    def __post_init__(self):
        if self.truth is not None and self.truth.I != self.table.I:
            raise ContractViolationError("truth length must match the record count")
        if self.net is not None and self.net.n_nodes != self.table.I:
            raise ContractViolationError("network node count must match the record count")

    def decode(self, i: int, l: int) -> str:
        return self.codebooks[l][self.table.values[i, l]]


@dataclass(frozen=True)
class ScenarioSpec:
    beta: float
    sigma2: float
    K: int
    seed: int = 0

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ContractViolationError("scenario variance must be positive")


SCENARIOS = {
    "1": ScenarioSpec(beta=10.0, sigma2=178.0, K=2),
    "2": ScenarioSpec(beta=10.0, sigma2=278.0, K=2),
}


# ---------------------------------------------------------------------------
# loaders
# ---------------------------------------------------------------------------


def _read_csv_rows(path) -> tuple[list, list]:
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"{path}: file not found")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise IngestionError(f"{path}: not valid UTF-8 ({exc})") from None
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise IngestionError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    if not body:
        raise IngestionError(f"{path}: no data rows after the header")
    return header, body


def load_profiles(path, fields=None) -> Dataset:
    """Read categorical profile columns; codes follow the sorted distinct labels."""
    header, body = _read_csv_rows(path)
    if fields is None:
        fields = header
    cols = []
    for name in fields:
        if name not in header:
            raise IngestionError(f"{path}: column {name!r} not in header {header}")
        cols.append(header.index(name))

    I, L = len(body), len(fields)
    raw = np.empty((I, L), dtype=object)
    for r, row in enumerate(body):
        if len(row) != len(header):
            raise IngestionError(f"{path}: row {r + 2} has {len(row)} cells, expected {len(header)}")
        for c, col in enumerate(cols):
            cell = row[col].strip()
            if not cell:
                raise IngestionError(f"{path}: row {r + 2}, column {fields[c]!r} is empty")
            raw[r, c] = cell

    codebooks = []
    values = np.empty((I, L), dtype=np.int64)
    for c in range(L):
        labels = tuple(sorted(set(raw[:, c])))
        if len(labels) < 2:
            raise IngestionError(
                f"{path}: column {fields[c]!r} has {len(labels)} distinct value(s); "
                "fields must vary (at least 2 categories)"
            )
        lookup = {lab: k for k, lab in enumerate(labels)}
        for r in range(I):
            values[r, c] = lookup[raw[r, c]]
        codebooks.append(labels)

    table = RecordTable(values, np.array([len(cb) for cb in codebooks]))
    return Dataset(table=table, field_names=tuple(fields), codebooks=tuple(codebooks))


def load_truth(path, expected_records: int | None = None) -> LinkageState:
    header, body = _read_csv_rows(path)
    if len(header) != 1:
        raise IngestionError(f"{path}: truth file must have a single identity column")
    ids = []
    for r, row in enumerate(body):
        try:
            ids.append(int(row[0]))
        except (ValueError, IndexError):
            raise IngestionError(f"{path}: row {r + 2} is not a single integer") from None
    if expected_records is not None and len(ids) != expected_records:
        raise IngestionError(
            f"{path}: {len(ids)} identities but {expected_records} records loaded"
        )
    return LinkageState(np.array(ids))


def load_network(path, n_nodes: int) -> Network:
    header, body = _read_csv_rows(path)
    if [h.strip() for h in header] != ["i", "j"]:
        raise IngestionError(f"{path}: network header must be 'i,j'")
    edges = np.empty((len(body), 2), dtype=np.int64)
    for r, row in enumerate(body):
        try:
            edges[r] = (int(row[0]), int(row[1]))
        except (ValueError, IndexError):
            raise IngestionError(f"{path}: row {r + 2} is not an integer pair") from None
        if not 0 <= edges[r, 0] < edges[r, 1] < n_nodes:
            raise IngestionError(f"{path}: row {r + 2} violates 0 <= i < j < {n_nodes}")
    return Network(n_nodes, edges)


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------


def synth_network(truth: LinkageState, scen: ScenarioSpec, rng: np.random.Generator) -> Network:
    """Social ties from the latent distance model over the true entities."""
    N = truth.n_clusters
    U = rng.normal(0.0, np.sqrt(scen.sigma2), size=(N, scen.K))
    pos = U[truth.xi - 1]
    I = truth.I
    iu = np.triu_indices(I, k=1)
    d = np.sqrt(np.sum((pos[iu[0]] - pos[iu[1]]) ** 2, axis=1))
    p = expit(scen.beta - d)
    hit = rng.random(len(p)) < p
    edges = np.column_stack([iu[0][hit], iu[1][hit]])
    return Network(I, edges)


def synth_profiles(
    truth: LinkageState,
    domains,
    distortion: float,
    rng: np.random.Generator,
    field_probs=None,
    return_latent: bool = False,
):
    """Categorical profiles from the hit-miss model around entity true values.

    Each entity draws true codes from the field distributions; records copy
    them, and each cell is independently redrawn from its field distribution
    with probability ``distortion``.
    """
    if not 0 <= distortion <= 1:
        raise ContractViolationError("distortion must be in [0,1]")
    domains = np.asarray(domains, dtype=np.int64)
    L = len(domains)
    if field_probs is None:
        field_probs = [rng.dirichlet(np.ones(m)) for m in domains]
    N, I = truth.n_clusters, truth.I
    Pi = np.column_stack([rng.choice(domains[l], size=N, p=field_probs[l]) for l in range(L)])
    P = Pi[truth.xi - 1].copy()
    distorted = rng.random((I, L)) < distortion
    for l in range(L):
        n_bad = int(distorted[:, l].sum())
        if n_bad:
            P[distorted[:, l], l] = rng.choice(domains[l], size=n_bad, p=field_probs[l])
    table = RecordTable(P, domains)
    if return_latent:
        return table, Pi, field_probs
    return table


def _replica_field_probs() -> tuple[np.ndarray, list]:
    """Birth-date-like field distributions: year (bell over 60), month, day."""
    year = np.exp(-0.5 * ((np.arange(60) - 30.0) / 14.0) ** 2)
    month = np.ones(12)
    day = np.ones(28)
    probs = [year / year.sum(), month / month.sum(), day / day.sum()]
    return np.array([60, 12, 28]), probs


def make_rldata_replica(seed: int = 0, distortion: float = 0.05) -> Dataset:
    """Offline stand-in for the RLdata500 categorical fields.

    500 records over 450 entities; 50 entities are duplicated exactly once.
    Fields mimic year/month/day of birth. The real file can be used instead
    wherever a Dataset is accepted.
    """
    rng = np.random.default_rng(seed)
    I, n_dup = 500, 50
    ids = np.arange(1, I - n_dup + 1)
    dup = rng.choice(ids, size=n_dup, replace=False)
    labels = np.concatenate([ids, dup])
    rng.shuffle(labels)
    truth = LinkageState(labels)

    domains, probs = _replica_field_probs()
    table = synth_profiles(truth, domains, distortion, rng, field_probs=probs)
    names = ("by", "bm", "bd")
    offsets = (1943, 1, 1)  # year/month/day labels
    codebooks = tuple(
        tuple(str(offsets[l] + k) for k in range(m)) for l, m in enumerate(domains)
    )
    return Dataset(table=table, field_names=names, codebooks=codebooks, truth=truth)


# ---------------------------------------------------------------------------
# dataset bundles
# ---------------------------------------------------------------------------


def write_bundle(dataset: Dataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "profiles.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(dataset.field_names) + "\n")
        for i in range(dataset.table.I):
            fh.write(",".join(dataset.decode(i, l) for l in range(dataset.table.L)) + "\n")
    if dataset.truth is not None:
        with open(out / "truth.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("identity\n")
            for lab in dataset.truth.xi:
                fh.write(f"{lab}\n")
    if dataset.net is not None:
        with open(out / "network.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("i,j\n")
            for i, j in dataset.net.edges:
                fh.write(f"{i},{j}\n")


def read_bundle(data_dir, fields=None) -> Dataset:
    data_dir = Path(data_dir)
    ds = load_profiles(data_dir / "profiles.csv", fields=fields)
    truth = None
    if (data_dir / "truth.csv").exists():
        truth = load_truth(data_dir / "truth.csv", expected_records=ds.table.I)
    net = None
    if (data_dir / "network.csv").exists():
        net = load_network(data_dir / "network.csv", n_nodes=ds.table.I)
    return Dataset(table=ds.table, field_names=ds.field_names, codebooks=ds.codebooks,
                   net=net, truth=truth)

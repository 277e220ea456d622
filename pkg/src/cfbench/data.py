"""Interaction file loading, ID remapping, and per-user history tables.

Interaction files are UTF-8 text, one user per line: the first
whitespace-separated decimal token is the raw user ID, the remaining
tokens are raw item IDs. Lines starting with ``#`` and blank lines are
ignored. This is the format used by the public train/test splits of the
common implicit-feedback benchmarks (Amazon-Books, Yelp2018, Gowalla,
MovieLens, ...).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DatasetError(Exception):
    """Base class for interaction-data problems."""


class MalformedLineError(DatasetError):
    """A token in an interaction file is not a decimal integer."""


class UnknownTestUserError(DatasetError):
    """A test user never appears in the training file."""


class UnknownTestItemError(DatasetError):
    """A test item never appears in the training file (no embedding exists)."""


class EmptyDatasetError(DatasetError):
    """The training file contains no interactions."""


def _parse_lines(path: str | Path) -> list[tuple[int, list[int]]]:
    """Parse one interaction file into (raw_user, [raw_items...]) tuples."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read interaction file {path}: {exc}") from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        try:
            values = [int(tok) for tok in tokens]
        except ValueError as exc:
            raise MalformedLineError(f"{path}:{lineno}: non-integer token in {tokens!r}") from exc
        rows.append((values[0], values[1:]))
    return rows


@dataclass(frozen=True, eq=False)
class InteractionDataset:
    """Remapped user/item ID spaces with per-user positive sets.

    Indices are contiguous and assigned in first-appearance order over the
    training file. ``train_order`` keeps each user's deduplicated positives
    in file order (used to build histories); ``train_pos``/``test_pos`` are
    the same items as sorted arrays for fast membership tests. The item
    index ``num_items`` is reserved as the history padding token and never
    corresponds to a real item.
    """

    num_users: int
    num_items: int
    train_pos: tuple[np.ndarray, ...]
    test_pos: tuple[np.ndarray, ...]
    train_order: tuple[np.ndarray, ...]
    user_ids: np.ndarray  # index -> raw user ID
    item_ids: np.ndarray  # index -> raw item ID
    user_index: dict[int, int] = field(repr=False)  # raw user ID -> index
    item_index: dict[int, int] = field(repr=False)  # raw item ID -> index
    _train_keys: np.ndarray = field(repr=False)  # sorted u*num_items+i keys

    @property
    def pad_index(self) -> int:
        return self.num_items

    @property
    def num_train_pairs(self) -> int:
        return int(self._train_keys.shape[0])

    def train_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """All (user, item) training pairs in user-major file order."""
        users = np.concatenate(
            [np.full(len(items), u, dtype=np.int64) for u, items in enumerate(self.train_order)]
        ) if self.num_train_pairs else np.empty(0, dtype=np.int64)
        items = (
            np.concatenate(self.train_order)
            if self.num_train_pairs
            else np.empty(0, dtype=np.int64)
        )
        return users, items

    def is_train_positive(self, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        """Vectorized membership test: is (users[i], items[i]) a train positive."""
        keys = np.asarray(users, dtype=np.int64) * self.num_items + np.asarray(items, dtype=np.int64)
        pos = np.searchsorted(self._train_keys, keys)
        pos = np.minimum(pos, len(self._train_keys) - 1) if len(self._train_keys) else pos
        if len(self._train_keys) == 0:
            return np.zeros(keys.shape, dtype=bool)
        return self._train_keys[pos] == keys

    def replace_train(
        self, train_order: tuple[np.ndarray, ...], test_pos: tuple[np.ndarray, ...] | None = None
    ) -> "InteractionDataset":
        """New dataset over the same vocabularies with different positives."""
        return _assemble(
            self.num_users,
            self.num_items,
            train_order,
            self.test_pos if test_pos is None else test_pos,
            self.user_ids,
            self.item_ids,
            self.user_index,
            self.item_index,
        )


def _dedup_keep_order(items: list[int]) -> np.ndarray:
    seen: set[int] = set()
    out = []
    for it in items:
        if it not in seen:
            seen.add(it)
            out.append(it)
    return np.asarray(out, dtype=np.int64)


def _assemble(num_users, num_items, train_order, test_pos, user_ids, item_ids, user_index, item_index):
    train_pos = tuple(np.sort(order) for order in train_order)
    if train_pos:
        keys = np.concatenate(
            [u * num_items + pos for u, pos in enumerate(train_pos)] or [np.empty(0, dtype=np.int64)]
        ).astype(np.int64)
    else:
        keys = np.empty(0, dtype=np.int64)
    return InteractionDataset(
        num_users=num_users,
        num_items=num_items,
        train_pos=train_pos,
        test_pos=tuple(test_pos),
        train_order=tuple(train_order),
        user_ids=np.asarray(user_ids, dtype=np.int64),
        item_ids=np.asarray(item_ids, dtype=np.int64),
        user_index=dict(user_index),
        item_index=dict(item_index),
        _train_keys=keys,
    )


def load_interactions(train_path: str | Path, test_path: str | Path | None = None) -> InteractionDataset:
    """Load train (and optionally test) interaction files.

    Duplicate (user, item) pairs are dropped, keeping the first occurrence.
    Every test user and test item must already appear in the training file;
    unseen ones are rejected because no trained embedding would exist for
    them. Loading is deterministic given the file bytes.
    """
    rows = _parse_lines(train_path)
    if not any(items for _, items in rows) and not rows:
        raise EmptyDatasetError(f"no interactions in {train_path}")

    user_index: dict[int, int] = {}
    item_index: dict[int, int] = {}
    per_user: list[list[int]] = []
    for raw_user, raw_items in rows:
        if raw_user not in user_index:
            user_index[raw_user] = len(user_index)
            per_user.append([])
        u = user_index[raw_user]
        for raw_item in raw_items:
            if raw_item not in item_index:
                item_index[raw_item] = len(item_index)
            per_user[u].append(item_index[raw_item])

    num_users = len(user_index)
    num_items = len(item_index)
    if num_items == 0:
        raise EmptyDatasetError(f"no interactions in {train_path}")

    train_order = tuple(_dedup_keep_order(items) for items in per_user)

    test_sets: list[set[int]] = [set() for _ in range(num_users)]
    if test_path is not None:
        for raw_user, raw_items in _parse_lines(test_path):
            if raw_user not in user_index:
                raise UnknownTestUserError(
                    f"test user {raw_user} does not appear in the training file"
                )
            u = user_index[raw_user]
            for raw_item in raw_items:
                if raw_item not in item_index:
                    raise UnknownTestItemError(
                        f"test item {raw_item} does not appear in the training file"
                    )
                test_sets[u].add(item_index[raw_item])
    test_pos = tuple(np.asarray(sorted(s), dtype=np.int64) for s in test_sets)

    user_ids = np.empty(num_users, dtype=np.int64)
    for raw, idx in user_index.items():
        user_ids[idx] = raw
    item_ids = np.empty(num_items, dtype=np.int64)
    for raw, idx in item_index.items():
        item_ids[idx] = raw

    return _assemble(num_users, num_items, train_order, test_pos, user_ids, item_ids, user_index, item_index)


@dataclass(frozen=True, eq=False)
class HistoryTable:
    """Fixed-length per-user windows over training positives.

    ``items[u]`` holds the first ``window`` training positives of user u in
    file order, right-padded with the padding token (index ``num_items``);
    ``mask[u][k]`` is False exactly on padded slots.
    """

    window: int
    items: np.ndarray  # (num_users, window) int64
    mask: np.ndarray  # (num_users, window) bool


def build_histories(ds: InteractionDataset, window: int) -> HistoryTable:
    """Materialize the history table: first ``window`` positives, padded.

    Users with more positives than the window are chunked to the first
    ``window`` in file order; users with fewer are padded; cold users get an
    all-padding row.
    """
    if window < 1:
        raise ValueError(f"history window must be >= 1, got {window}")
    items = np.full((ds.num_users, window), ds.pad_index, dtype=np.int64)
    mask = np.zeros((ds.num_users, window), dtype=bool)
    for u, order in enumerate(ds.train_order):
        n = min(window, len(order))
        items[u, :n] = order[:n]
        mask[u, :n] = True
    return HistoryTable(window=window, items=items, mask=mask)


@dataclass(frozen=True, eq=False)
class HoldoutSet:
    """History/target pairs for users outside the training user space.

    Used for inductive (strong-generalization) evaluation: each held-out
    user is described only by the items they interacted with, split into a
    history part (model input) and a target part (ranking ground truth).
    Items are indices into the training item vocabulary.
    """

    user_ids: np.ndarray  # raw IDs, for reporting
    histories: tuple[np.ndarray, ...]
    targets: tuple[np.ndarray, ...]


def load_holdout(
    history_path: str | Path, target_path: str | Path, ds: InteractionDataset
) -> HoldoutSet:
    """Load held-out users for strong-generalization evaluation.

    Both files use the standard interaction format and must list the same
    users. Every item must appear in the training item vocabulary. History
    and target sets are disjoint per user; users with an empty target set
    are kept but skipped at evaluation time.
    """
    hist_rows = _parse_lines(history_path)
    tgt_rows = {raw: items for raw, items in _parse_lines(target_path)}

    user_ids = []
    histories = []
    targets = []
    for raw_user, raw_items in hist_rows:
        if raw_user not in tgt_rows:
            raise DatasetError(f"held-out user {raw_user} has a history line but no target line")
        hist = _map_items(raw_items, ds, history_path)
        tgt = _map_items(tgt_rows[raw_user], ds, target_path)
        overlap = set(hist.tolist()) & set(tgt.tolist())
        if overlap:
            raise DatasetError(
                f"held-out user {raw_user}: items {sorted(overlap)} appear in both history and targets"
            )
        user_ids.append(raw_user)
        histories.append(hist)
        targets.append(np.sort(tgt))
    missing = set(tgt_rows) - set(user_ids)
    if missing:
        raise DatasetError(f"held-out users {sorted(missing)} have targets but no history line")
    return HoldoutSet(
        user_ids=np.asarray(user_ids, dtype=np.int64),
        histories=tuple(histories),
        targets=tuple(targets),
    )


def _map_items(raw_items: list[int], ds: InteractionDataset, path) -> np.ndarray:
    out = []
    seen: set[int] = set()
    for raw in raw_items:
        if raw not in ds.item_index:
            raise UnknownTestItemError(
                f"{path}: item {raw} does not appear in the training file"
            )
        idx = ds.item_index[raw]
        if idx not in seen:
            seen.add(idx)
            out.append(idx)
    return np.asarray(out, dtype=np.int64)


def write_interactions(path: str | Path, rows: dict[int, list[int]] | list[tuple[int, list[int]]]) -> None:
    """Write interactions in the standard one-user-per-line text format."""
    if isinstance(rows, dict):
        rows = list(rows.items())
    with open(path, "w", encoding="utf-8") as fh:
        for user, items in rows:
            fh.write(" ".join(str(t) for t in [user, *items]))
            fh.write("\n")

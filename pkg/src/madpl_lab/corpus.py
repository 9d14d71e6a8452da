"""Flat-file dialog corpus: one line per turn, both roles interleaved.

Line format after the comment header:
``dialog_id,turn,role,<state csv>,<action csv>,terminal_bit``
State and action widths are fixed per role and recorded in the header so a
reader can split the flat row without the ontology at hand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError

FORMAT_TAG = "madpl-lab corpus v1"


@dataclass
class RoleRecords:
    dialog_ids: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    terminal: np.ndarray

    def __len__(self):
        return int(self.dialog_ids.shape[0])


@dataclass
class Corpus:
    system: RoleRecords
    user: RoleRecords
    success: dict   # dialog_id -> bool

    def records(self, role):
        return self.system if role == "system" else self.user


def _fmt_vec(vec):
    return ",".join("%g" % v for v in vec)


def write_corpus(path, rows, layout, success=None):
    """Write per-turn rows; each row is (dialog_id, turn, role, state vector,
    action vector, terminal bit)."""
    dims = {
        "system": (layout.sys_dim, layout.sys_space.dim),
        "user": (layout.user_dim, layout.user_space.dim),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {FORMAT_TAG}\n")
        for role, (sd, ad) in dims.items():
            fh.write(f"# {role} state_dim={sd} act_dim={ad}\n")
        for dialog_id, flag in sorted((success or {}).items()):
            fh.write(f"# dialog {dialog_id} success={int(flag)}\n")
        for dialog_id, turn, role, state, action, terminal in rows:
            sd, ad = dims[role]
            if len(state) != sd or len(action) != ad:
                raise ValueError(
                    f"row for dialog {dialog_id} turn {turn} role {role} has "
                    f"widths {len(state)}/{len(action)}, expected {sd}/{ad}"
                )
            fh.write(
                f"{dialog_id},{turn},{role},{_fmt_vec(state)},"
                f"{_fmt_vec(action)},{int(terminal)}\n"
            )


def read_corpus(path):
    dims = {}
    success = {}
    buckets = {"system": [], "user": []}
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# {FORMAT_TAG}":
            raise ParseError(f"{path}: not a corpus file (bad first line)")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 3 and parts[0] in ("system", "user"):
                    try:
                        sd = int(parts[1].split("=")[1])
                        ad = int(parts[2].split("=")[1])
                    except (IndexError, ValueError):
                        raise ParseError(
                            f"{path}:{lineno}: malformed dims header"
                        ) from None
                    dims[parts[0]] = (sd, ad)
                elif len(parts) == 3 and parts[0] == "dialog":
                    success[int(parts[1])] = parts[2] == "success=1"
                continue
            cells = line.split(",")
            if len(cells) < 4:
                raise ParseError(f"{path}:{lineno}: too few fields")
            role = cells[2]
            if role not in dims:
                raise ParseError(f"{path}:{lineno}: unknown role {role!r}")
            sd, ad = dims[role]
            if len(cells) != 3 + sd + ad + 1:
                raise ParseError(
                    f"{path}:{lineno}: expected {3 + sd + ad + 1} fields for "
                    f"role {role}, got {len(cells)}"
                )
            try:
                dialog_id = int(cells[0])
                state = [float(v) for v in cells[3:3 + sd]]
                action = [float(v) for v in cells[3 + sd:3 + sd + ad]]
                terminal = int(cells[-1])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            buckets[role].append((dialog_id, state, action, terminal))

    def pack(rows, sd, ad):
        if not rows:
            return RoleRecords(
                dialog_ids=np.zeros(0, dtype=np.int64),
                states=np.zeros((0, sd)),
                actions=np.zeros((0, ad)),
                terminal=np.zeros(0),
            )
        return RoleRecords(
            dialog_ids=np.array([r[0] for r in rows], dtype=np.int64),
            states=np.array([r[1] for r in rows]),
            actions=np.array([r[2] for r in rows]),
            terminal=np.array([float(r[3]) for r in rows]),
        )

    if "system" not in dims or "user" not in dims:
        raise ParseError(f"{path}: missing role dims header")
    return Corpus(
        system=pack(buckets["system"], *dims["system"]),
        user=pack(buckets["user"], *dims["user"]),
        success=success,
    )

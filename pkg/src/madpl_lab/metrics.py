"""Dialog-level evaluation: inform recall/precision/F1, match rate, success.

All quantities are computed from grounded dialog acts and the booking table,
never from agent internals, so scripted and learned agents are scored by the
same code path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .acts import NO_VALUE
from .ontology import DONT_CARE


def requested_pairs(goal):
    """Set of (domain, slot) pairs the goal wants answered."""
    return {(d, s) for d in goal.domains for s in goal.sub[d].requests}


def informed_pairs(sys_turns, ontology):
    """(domain, slot) pairs the system actually answered.

    Only informs of requestable slots count, and only when a concrete value
    was attached; a placeholder inform with no backing entity answers nothing.
    """
    out = set()
    for acts in sys_turns:
        for act in acts:
            if act.intent != "inform" or act.domain == "general":
                continue
            try:
                dom = ontology.get(act.domain)
            except Exception:
                continue
            if act.slot in dom.requestable and act.value != NO_VALUE:
                out.add((act.domain, act.slot))
    return out


def inform_counts(informed, wanted):
    """(true positives, informed count, wanted count) for one dialog."""
    tp = len(informed & wanted)
    return tp, len(informed), len(wanted)


def inform_prf(informed, wanted):
    """Precision/recall/F1 for one dialog; vacuously perfect with no requests."""
    if not wanted:
        return 1.0, 1.0, 1.0
    tp, n_inf, n_want = inform_counts(informed, wanted)
    p = tp / n_inf if n_inf else 0.0
    r = tp / n_want
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def entity_by_id(db, domain, entity_id):
    for ent in db.entities.get(domain, ()):
        if ent.id == entity_id:
            return ent
    return None


def entity_satisfies(entity, constraints):
    """True when the entity agrees with every non-dont-care constraint."""
    return all(
        entity.attributes.get(s) == v
        for s, v in constraints.items()
        if v != DONT_CARE
    )


def dialog_match(goal, booked, db):
    """Fraction of booking domains whose booked entity fits the constraints.

    1.0 when the goal needs no booking.
    """
    domains = goal.booking_domains()
    if not domains:
        return 1.0
    ok = 0
    for d in domains:
        ent_id = booked.get(d)
        ent = entity_by_id(db, d, ent_id) if ent_id else None
        if ent is not None and entity_satisfies(ent, goal.sub[d].constraints):
            ok += 1
    return ok / len(domains)


def dialog_success(goal, informed, booked, db):
    """Task success: every requested slot answered and every booking matches."""
    _, r, _ = inform_prf(informed, requested_pairs(goal))
    return r >= 1.0 and dialog_match(goal, booked, db) >= 1.0


@dataclass
class EvalReport:
    n_dialogs: int
    avg_turns: float
    inform_p: float
    inform_r: float
    inform_f1: float
    match: float
    success: float
    by_domain_count: dict = field(default_factory=dict)

    def row(self):
        return {
            "n_dialogs": self.n_dialogs,
            "avg_turns": round(self.avg_turns, 3),
            "inform_p": round(self.inform_p, 4),
            "inform_r": round(self.inform_r, 4),
            "inform_f1": round(self.inform_f1, 4),
            "match": round(self.match, 4),
            "success": round(self.success, 4),
        }


def summarize(records, world):
    """Aggregate dialog records into an EvalReport.

    Inform precision/recall/F1 pool true positives across dialogs; match and
    success are per-dialog means. Dialogs are also sliced by the number of
    goal domains.
    """
    if not records:
        return EvalReport(0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0)
    buckets = {}
    for rec in records:
        buckets.setdefault(len(rec.goal.domains), []).append(rec)

    def _agg(rows):
        tp = n_inf = n_want = 0
        match_sum = 0.0
        succ = 0
        turns = 0
        for rec in rows:
            informed = informed_pairs(rec.sys_turns(), world.ontology)
            wanted = requested_pairs(rec.goal)
            t, i, w = inform_counts(informed, wanted)
            tp, n_inf, n_want = tp + t, n_inf + i, n_want + w
            match_sum += dialog_match(rec.goal, rec.booked, world.db)
            succ += int(dialog_success(rec.goal, informed, rec.booked, world.db))
            turns += rec.turn_count
        p = tp / n_inf if n_inf else 1.0
        r = tp / n_want if n_want else 1.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        n = len(rows)
        return EvalReport(
            n_dialogs=n,
            avg_turns=turns / n,
            inform_p=p,
            inform_r=r,
            inform_f1=f1,
            match=match_sum / n,
            success=succ / n,
        )

    top = _agg(records)
    top.by_domain_count = {k: _agg(v) for k, v in sorted(buckets.items())}
    return top


def format_report_table(named_reports):
    """Fixed-width text table, one row per evaluated agent pair."""
    header = f"{'pair':<24} {'turns':>6} {'inform F1':>10} {'match':>7} {'success':>8}"
    lines = [header, "-" * len(header)]
    for name, rep in named_reports.items():
        lines.append(
            f"{name:<24} {rep.avg_turns:>6.2f} {rep.inform_f1:>10.3f} "
            f"{rep.match:>7.3f} {rep.success:>8.3f}"
        )
    return "\n".join(lines) + "\n"


def report_csv(named_reports):
    cols = ["pair", "n_dialogs", "avg_turns", "inform_p", "inform_r",
            "inform_f1", "match", "success"]
    lines = [",".join(cols)]
    for name, rep in named_reports.items():
        row = rep.row()
        lines.append(",".join([name] + [str(row[c]) for c in cols[1:]]))
    return "\n".join(lines) + "\n"

"""Positioning new persons and new items in a fitted latent space.

The fitted space stays frozen: original positions, intercepts, and the
latent-space variance are fixed at their point estimates, so there is no
rotational indeterminacy and no post-processing.  Fast closed-form
approximations are available along the fitted linkage direction; fixed-space
Metropolis samplers cover every case.

Update policies for new items follow the two pair-set conventions:
place-only keeps only pairs with exactly one new unit (new units never
interact and nothing original is touched), while partial-update keeps pairs
with at least one new unit (new items inform each other, new persons are
re-sampled with the new items included, and derived positions of original
units are refreshed over the joint unit set for reporting).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .data import (
    MISSING,
    Encoding,
    ResponseMatrix,
    encode_pairs_array,
    parse_response_csv,
)
from .engine import log1p_exp, pair_indices
from .model import Linkage, ModelConfig
from .postprocess import PosteriorSummary
from .sampler import AdaptationConfig, McmcConfig

__all__ = [
    "ExtendError",
    "UnsupportedCaseError",
    "SumScoreNoMatchError",
    "DegenerateItemError",
    "FittedModel",
    "NewDataKind",
    "UpdatePolicy",
    "NewDataCase",
    "NewResponses",
    "load_new_responses",
    "NewUnitDraws",
    "NewPersonsResult",
    "NewItemsResult",
    "approx_new_position",
    "approx_new_intercept",
    "sample_new_persons",
    "sample_new_items",
]


class ExtendError(ValueError):
    """Invalid extension request."""


class UnsupportedCaseError(ExtendError):
    """The approximation is only defined along the fitted linkage direction;
    use the sampling path instead."""


class SumScoreNoMatchError(ExtendError):
    """The new unit's sum score was never observed at fit time."""


class DegenerateItemError(ExtendError):
    """A new item nobody answered positively cannot be linkage-placed."""


class NewDataKind(str, Enum):
    NEW_PERSONS_SAME_ITEMS = "new-persons-same-items"
    NEW_ITEMS_SAME_PERSONS = "new-items-same-persons"
    NEW_PERSONS_WITH_NEW_ITEMS = "new-persons-with-new-items"


@dataclass(frozen=True)
class NewResponses:
    """Extension payload: like a response matrix, but a single new row or a
    single new column is a legitimate payload, so only the value domain and
    id uniqueness are enforced."""

    values: np.ndarray
    person_ids: tuple[str, ...]
    item_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.int8)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ExtendError("payload must be a non-empty 2-d grid")
        if not np.isin(values, (0, 1, MISSING)).all():
            raise ExtendError("payload values must be 0, 1, or missing")
        if len(set(self.person_ids)) != len(self.person_ids) or len(
            self.person_ids
        ) != values.shape[0]:
            raise ExtendError("payload person ids must be unique, one per row")
        if len(set(self.item_ids)) != len(self.item_ids) or len(
            self.item_ids
        ) != values.shape[1]:
            raise ExtendError("payload item ids must be unique, one per column")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "person_ids", tuple(str(x) for x in self.person_ids))
        object.__setattr__(self, "item_ids", tuple(str(x) for x in self.item_ids))

    @property
    def n_persons(self) -> int:
        return self.values.shape[0]

    @property
    def n_items(self) -> int:
        return self.values.shape[1]


def load_new_responses(
    path,
    *,
    missing_token: str = "NA",
    has_person_id_column: bool = False,
) -> NewResponses:
    """Read an extension payload in the same CSV format as fit data."""
    values, person_ids, item_ids = parse_response_csv(
        path, missing_token=missing_token, has_person_id_column=has_person_id_column
    )
    return NewResponses(values, person_ids, item_ids)


class UpdatePolicy(str, Enum):
    PLACE_ONLY = "place-only"
    PARTIAL_UPDATE = "partial-update"


@dataclass(frozen=True)
class FittedModel:
    """Point estimates of a fitted latent space plus the data that built it."""

    person_positions: np.ndarray  # (n, d)
    item_positions: np.ndarray  # (p, d)
    person_intercepts: np.ndarray  # (n,)
    item_intercepts: np.ndarray  # (p,)
    sigma_sq: float
    config: ModelConfig
    X: ResponseMatrix
    intercept_by_sum_score: dict[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in (
            "person_positions",
            "item_positions",
            "person_intercepts",
            "item_intercepts",
        ):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n, p = self.X.n_persons, self.X.n_items
        d = self.config.d
        if self.person_positions.shape != (n, d):
            raise ExtendError("person_positions shape mismatch with data/config")
        if self.item_positions.shape != (p, d):
            raise ExtendError("item_positions shape mismatch with data/config")
        if self.person_intercepts.shape != (n,):
            raise ExtendError("person_intercepts shape mismatch")
        if self.item_intercepts.shape != (p,):
            raise ExtendError("item_intercepts shape mismatch")
        if not self.sigma_sq > 0:
            raise ExtendError("sigma_sq must be positive")
        if not self.intercept_by_sum_score:
            object.__setattr__(
                self,
                "intercept_by_sum_score",
                _sum_score_lookup(self.X, self.person_intercepts),
            )

    @property
    def data_hash(self) -> str:
        return self.X.content_hash()

    @classmethod
    def from_summary(cls, summary: PosteriorSummary, X: ResponseMatrix) -> "FittedModel":
        return cls(
            person_positions=summary.person_positions,
            item_positions=summary.item_positions,
            person_intercepts=summary.person_intercepts.mean,
            item_intercepts=summary.item_intercepts.mean,
            sigma_sq=float(summary.sigma_sq.mean[0]),
            config=summary.config,
            X=X,
        )

    def require_same_data(self, X: ResponseMatrix) -> None:
        if X.content_hash() != self.data_hash:
            raise ExtendError(
                "supplied original data does not match the fitted model "
                "(content hash mismatch)"
            )


def _sum_score_lookup(
    X: ResponseMatrix, person_intercepts: np.ndarray
) -> dict[int, float]:
    scores = X.sum_scores()
    return {
        int(s): float(person_intercepts[scores == s].mean())
        for s in np.unique(scores)
    }


@dataclass(frozen=True)
class NewDataCase:
    """New response data to reconcile against a fitted model."""

    kind: NewDataKind
    payload: "ResponseMatrix | NewResponses"
    update_policy: UpdatePolicy = UpdatePolicy.PARTIAL_UPDATE

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", NewDataKind(self.kind))
        object.__setattr__(self, "update_policy", UpdatePolicy(self.update_policy))

    def validate_against(self, fitted: FittedModel) -> None:
        old_items = set(fitted.X.item_ids)
        old_persons = set(fitted.X.person_ids)
        pay = self.payload
        if self.kind is NewDataKind.NEW_PERSONS_SAME_ITEMS:
            if pay.item_ids != fitted.X.item_ids:
                raise ExtendError(
                    "new-person payload must carry exactly the fitted item "
                    "columns, in order"
                )
            clash = old_persons & set(pay.person_ids)
            if clash:
                raise ExtendError(f"person ids already present in the fit: {sorted(clash)[:5]}")
        elif self.kind is NewDataKind.NEW_ITEMS_SAME_PERSONS:
            unknown = set(pay.person_ids) - old_persons
            if unknown:
                raise ExtendError(
                    f"new-item payload rows must belong to fitted persons; "
                    f"unknown ids: {sorted(unknown)[:5]}"
                )
            clash = old_items & set(pay.item_ids)
            if clash:
                raise ExtendError(f"item ids already present in the fit: {sorted(clash)[:5]}")
        else:
            clash = old_persons & set(pay.person_ids)
            if clash:
                raise ExtendError(f"person ids already present in the fit: {sorted(clash)[:5]}")
            missing_common = old_items - set(pay.item_ids)
            if missing_common:
                raise ExtendError(
                    "new-persons-with-new-items payload must include every "
                    f"fitted item; missing: {sorted(missing_common)[:5]}"
                )
            if not set(pay.item_ids) - old_items:
                raise ExtendError("payload adds no new items")

    def new_item_ids(self, fitted: FittedModel) -> tuple[str, ...]:
        old = set(fitted.X.item_ids)
        return tuple(i for i in self.payload.item_ids if i not in old)


# -- closed-form approximations -------------------------------------------------


def approx_new_position(
    responses: np.ndarray, fitted: FittedModel, kind: str = "person"
) -> np.ndarray:
    """Average of opposite-space point estimates over positive responses.

    Valid only along the fitted linkage direction: new persons under
    person-from-item, new items under item-from-person.  A unit with no
    positive responses maps to the origin.
    """
    responses = np.asarray(responses, dtype=np.int8)
    linkage = fitted.config.linkage
    if kind == "person":
        if linkage is not Linkage.PERSON_FROM_ITEM:
            raise UnsupportedCaseError(
                "approximating a new person position requires person-from-item "
                "linkage; use sample_new_persons for this fit"
            )
        if responses.shape != (fitted.X.n_items,):
            raise ExtendError("response row length must equal the fitted item count")
        weights = (responses == 1).astype(float)
        total = weights.sum()
        return (weights @ fitted.item_positions) / (fitted.config.epsilon + total)
    if kind == "item":
        if linkage is not Linkage.ITEM_FROM_PERSON:
            raise UnsupportedCaseError(
                "approximating a new item position requires item-from-person "
                "linkage; use sample_new_items for this fit"
            )
        if responses.shape != (fitted.X.n_persons,):
            raise ExtendError("response column length must equal the fitted person count")
        weights = (responses == 1).astype(float)
        total = weights.sum()
        if total == 0:
            return np.zeros(fitted.config.d)
        return (weights @ fitted.person_positions) / total
    raise ExtendError(f"kind must be 'person' or 'item', got {kind!r}")


def approx_new_intercept(responses: np.ndarray, fitted: FittedModel) -> float:
    """Mean fitted person intercept among persons who share the new row's
    sum score; there is nothing sensible to return for unseen scores."""
    responses = np.asarray(responses, dtype=np.int8)
    score = int((responses == 1).sum())
    try:
        return fitted.intercept_by_sum_score[score]
    except KeyError:
        raise SumScoreNoMatchError(
            f"sum score {score} was never observed at fit time; the "
            "approximation is undefined"
        ) from None


# -- frozen-space samplers ---------------------------------------------------------


@dataclass
class NewUnitDraws:
    """Retained draws and summaries for one newly positioned unit."""

    unit_id: str
    kind: str  # "person" or "item"
    intercept_draws: np.ndarray  # (R,)
    position_draws: np.ndarray  # (R, d)

    @property
    def intercept_mean(self) -> float:
        return float(self.intercept_draws.mean())

    @property
    def intercept_sd(self) -> float:
        return float(self.intercept_draws.std())

    @property
    def position_mean(self) -> np.ndarray:
        return self.position_draws.mean(axis=0)

    @property
    def position_sd(self) -> np.ndarray:
        return self.position_draws.std(axis=0)


@dataclass
class NewPersonsResult:
    units: dict[str, NewUnitDraws]
    approx_intercepts: dict[str, float | None]


@dataclass
class NewItemsResult:
    units: dict[str, NewUnitDraws]
    policy: UpdatePolicy
    persons: NewPersonsResult | None  # case 2 only
    refreshed_person_positions: np.ndarray | None
    refreshed_item_positions: np.ndarray | None


def _unit_rng(seed: int, unit_id: str) -> np.random.Generator:
    # Keyed by unit id so one unit's chain is independent of batch composition.
    digest = hashlib.sha256(unit_id.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([seed, key]))


def _lse_scalar(x: float) -> float:
    if x > 0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


class _MhScalar:
    """One adaptive random-walk scalar block.

    The current log-density is cached between steps; callers must
    ``invalidate()`` whenever the target itself changes under them (partner
    positions moving in a joint chain).
    """

    def __init__(self, value: float, scale: float, adaptation: AdaptationConfig):
        self.value = value
        self.scale = scale
        self.adaptation = adaptation
        self.accepted = 0
        self.proposed = 0
        self.current: float | None = None

    def _propose(self, rng) -> float:
        return self.value + self.scale * rng.standard_normal()

    def step(self, logdensity, rng) -> None:
        if self.current is None:
            self.current = logdensity(self.value)
        prop = self._propose(rng)
        cand = logdensity(prop)
        if math.log(rng.random()) < cand - self.current:
            self.value = prop
            self.current = cand
            self.accepted += 1
        self.proposed += 1

    def invalidate(self) -> None:
        self.current = None

    def adapt(self) -> None:
        if self.proposed:
            rate = self.accepted / self.proposed
            if rate > self.adaptation.target_high:
                self.scale *= self.adaptation.grow
            elif rate < self.adaptation.target_low:
                self.scale *= self.adaptation.shrink
        self.accepted = 0
        self.proposed = 0


class _MhVector(_MhScalar):
    """One adaptive random-walk vector block."""

    def __init__(self, value: np.ndarray, scale: float, adaptation: AdaptationConfig):
        super().__init__(np.asarray(value, dtype=float).copy(), scale, adaptation)

    def _propose(self, rng) -> np.ndarray:
        return self.value + self.scale * rng.standard_normal(self.value.shape[0])


def _person_target(
    row: np.ndarray,
    fitted: FittedModel,
    item_positions: np.ndarray,
):
    """Log-density pieces for one new person against a frozen space.

    Returns (theta_logdensity, position_logdensity); the two blocks never
    interact (the intercept enters only the person's own item-pair network,
    the position only the per-item person-pair networks).

    ``row`` spans ``item_positions`` (the fitted items first, then any new
    items).  The position block compares the new person to the original
    persons, who only ever answered the fitted items, so it always runs on
    the fitted-item prefix of the row.
    """
    enc = fitted.config.encoding
    p_all = item_positions.shape[0]
    if row.shape != (p_all,):
        raise ExtendError("response row length must match the item positions")
    sigma_theta_sq = fitted.config.priors.sigma_theta_sq
    sigma_sq = fitted.sigma_sq

    # Intercept side: the new person's own network over item pairs.
    qi, qj = pair_indices(p_all)
    u = encode_pairs_array(row[qi], row[qj], enc)
    obs = u != MISSING
    diff = item_positions[qi[obs]] - item_positions[qj[obs]]
    e_pairs = np.sqrt(np.einsum("qd,qd->q", diff, diff))
    u_one = u[obs] == 1
    u_sum = float(u_one.sum())
    e_pos_sum = float(e_pairs[u_one].sum())

    def theta_logdensity(theta: float) -> float:
        return (
            theta * u_sum
            - e_pos_sum
            - float(np.sum(log1p_exp(theta - e_pairs)))
            - theta * theta / (2.0 * sigma_theta_sq)
        )

    # Position side: edges to each original person, per fitted item.
    p_fit = fitted.X.n_items
    beta = fitted.item_intercepts
    y = encode_pairs_array(row[None, :p_fit], fitted.X.values, enc)  # (n, p_fit)
    y_obs = (y != MISSING).astype(np.float64)
    y_pos = (y == 1).astype(np.float64)
    b_sum = y_pos @ beta  # (n,)
    s_sum = y_pos.sum(axis=1)  # (n,)
    anchors = fitted.person_positions

    def position_logdensity(z: np.ndarray) -> float:
        dz = z[None, :] - anchors
        dist = np.sqrt(np.einsum("kd,kd->k", dz, dz))
        grid = log1p_exp(beta[None, :] - dist[:, None])
        grid *= y_obs
        ll = float((b_sum - s_sum * dist - grid.sum(axis=1)).sum())
        return ll - float(np.dot(z, z)) / (2.0 * sigma_sq)

    return theta_logdensity, position_logdensity


def _run_unit_chain(
    blocks: dict[str, object],
    densities: dict[str, object],
    mcmc: McmcConfig,
    rng: np.random.Generator,
    d: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Alternate MH blocks, adapt during burn-in, return retained draws."""
    n_keep = mcmc.retained_count
    intercepts = np.empty(n_keep)
    positions = np.empty((n_keep, d))
    kept = 0
    for it in range(1, mcmc.total_iterations + 1):
        blocks["intercept"].step(densities["intercept"], rng)
        blocks["position"].step(densities["position"], rng)
        in_burn = it <= mcmc.burn_in
        if in_burn and it % mcmc.adaptation.window == 0:
            blocks["intercept"].adapt()
            blocks["position"].adapt()
        if not in_burn and (it - mcmc.burn_in) % mcmc.thinning == 0:
            intercepts[kept] = blocks["intercept"].value
            positions[kept] = blocks["position"].value
            kept += 1
    return intercepts, positions


def sample_new_persons(
    rows: "ResponseMatrix | NewResponses",
    fitted: FittedModel,
    mcmc: McmcConfig,
    *,
    item_positions: np.ndarray | None = None,
) -> NewPersonsResult:
    """Sample (intercept, position) for each new person against the frozen fit.

    Persons are independent by construction (the space is fixed), so each one
    runs its own chain seeded from the run seed and its own id: results for a
    person do not depend on who else is in the batch.  The intercept chain
    starts at the sum-score approximation when that score was observed at fit
    time, else at zero.

    ``item_positions`` extends the item space for rows that also cover new
    items (fitted items first); by default rows must match the fitted items.
    """
    p_fit = fitted.X.n_items
    if item_positions is None:
        if rows.item_ids != fitted.X.item_ids:
            raise ExtendError("new rows must carry exactly the fitted item columns")
        item_pos = fitted.item_positions
    else:
        item_pos = np.asarray(item_positions, dtype=float)
        if rows.n_items != item_pos.shape[0] or rows.item_ids[:p_fit] != fitted.X.item_ids:
            raise ExtendError(
                "rows must cover the supplied item positions, fitted items first"
            )
    units: dict[str, NewUnitDraws] = {}
    approx: dict[str, float | None] = {}
    for idx, pid in enumerate(rows.person_ids):
        row = rows.values[idx]
        rng = _unit_rng(mcmc.seed, pid)
        try:
            theta0 = approx_new_intercept(row[:p_fit], fitted)
        except SumScoreNoMatchError:
            theta0 = 0.0
            approx[pid] = None
        else:
            approx[pid] = theta0
        theta_density, pos_density = _person_target(row, fitted, item_pos)
        blocks = {
            "intercept": _MhScalar(theta0, mcmc.scales.person_intercept, mcmc.adaptation),
            "position": _MhVector(
                rng.normal(0.0, math.sqrt(fitted.sigma_sq), fitted.config.d),
                mcmc.scales.position,
                mcmc.adaptation,
            ),
        }
        densities = {"intercept": theta_density, "position": pos_density}
        intercepts, positions = _run_unit_chain(
            blocks, densities, mcmc, rng, fitted.config.d
        )
        units[pid] = NewUnitDraws(pid, "person", intercepts, positions)
    return NewPersonsResult(units=units, approx_intercepts=approx)


def _item_beta_target(
    column: np.ndarray,
    person_positions: np.ndarray,
    sigma_beta_sq: float,
    enc: Encoding,
):
    """Log-density for a new item's intercept given frozen person positions."""
    n = person_positions.shape[0]
    pk, pl = pair_indices(n)
    y = encode_pairs_array(column[pk], column[pl], enc)
    obs = y != MISSING
    diff = person_positions[pk[obs]] - person_positions[pl[obs]]
    d_pairs = np.sqrt(np.einsum("qd,qd->q", diff, diff))
    y_pos = (y[obs] == 1).astype(np.float64)
    s = float(y_pos.sum())
    d_dot = float((y_pos * d_pairs).sum())

    def logdensity(beta: float) -> float:
        return (
            beta * s
            - d_dot
            - float(np.sum(log1p_exp(beta - d_pairs)))
            - beta * beta / (2.0 * sigma_beta_sq)
        )

    return logdensity


def _item_position_target_factory(
    col_self: np.ndarray,
    other_columns: np.ndarray,  # (n, q_other) responses to partner items
    theta: np.ndarray,  # (n,)
    sigma_sq: float,
    enc: Encoding,
):
    """U-side log-density for a new item's position against partner items.

    The partner positions are supplied at call time so partial-update chains
    can see other new items move.
    """
    u = encode_pairs_array(col_self[:, None], other_columns, enc)  # (n, q)
    u_obs = (u != MISSING).astype(np.float64)
    u_pos = (u == 1).astype(np.float64)
    a_sum = theta @ u_pos  # (q,)
    s_sum = u_pos.sum(axis=0)  # (q,)

    def logdensity(w: np.ndarray, partner_positions: np.ndarray) -> float:
        diff = w[None, :] - partner_positions
        dist = np.sqrt(np.einsum("qd,qd->q", diff, diff))
        grid = log1p_exp(theta[:, None] - dist[None, :])
        grid *= u_obs
        ll = float((a_sum - s_sum * dist - grid.sum(axis=0)).sum())
        return ll - float(np.dot(w, w)) / (2.0 * sigma_sq)

    return logdensity


def _combined_case2_matrix(
    fitted: FittedModel, payload: "ResponseMatrix | NewResponses"
) -> NewResponses:
    """Payload rows reordered to (fitted items..., new items...) columns."""
    new_ids = [i for i in payload.item_ids if i not in set(fitted.X.item_ids)]
    order = [payload.item_ids.index(i) for i in fitted.X.item_ids] + [
        payload.item_ids.index(i) for i in new_ids
    ]
    values = payload.values[:, order]
    return NewResponses(
        values, payload.person_ids, tuple(fitted.X.item_ids) + tuple(new_ids)
    )


def sample_new_items(
    case: NewDataCase,
    fitted: FittedModel,
    mcmc: McmcConfig,
) -> NewItemsResult:
    """Sample (intercept, position) for new items; optionally re-sample new
    persons (case 2) and refresh derived positions per the update policy.

    Case 1 freezes the original persons.  Case 2 first samples the new
    persons on the common items, then places the items; under partial-update
    the new persons are re-sampled with the new items included and derived
    positions of original units are refreshed over the joint unit set.
    """
    case.validate_against(fitted)
    if case.kind is NewDataKind.NEW_PERSONS_SAME_ITEMS:
        raise ExtendError("use sample_new_persons for new-persons-same-items data")
    new_ids = case.new_item_ids(fitted)
    partial = case.update_policy is UpdatePolicy.PARTIAL_UPDATE

    if case.kind is NewDataKind.NEW_ITEMS_SAME_PERSONS:
        # Columns aligned to the full fitted person axis; absent persons missing.
        pos_by_id = {pid: k for k, pid in enumerate(fitted.X.person_ids)}
        n = fitted.X.n_persons
        new_cols = np.full((n, len(new_ids)), MISSING, dtype=np.int8)
        for r, pid in enumerate(case.payload.person_ids):
            for c, iid in enumerate(case.payload.item_ids):
                if iid in new_ids:
                    new_cols[pos_by_id[pid], new_ids.index(iid)] = case.payload.values[r, c]
        person_positions = fitted.person_positions
        theta = fitted.person_intercepts
        old_cols = fitted.X.values
        persons_result = None
    else:
        combined = _combined_case2_matrix(fitted, case.payload)
        common = NewResponses(
            combined.values[:, : fitted.X.n_items],
            combined.person_ids,
            fitted.X.item_ids,
        )
        persons_result = sample_new_persons(common, fitted, mcmc)
        person_positions = np.vstack(
            [u.position_mean for u in persons_result.units.values()]
        )
        theta = np.array(
            [u.intercept_mean for u in persons_result.units.values()]
        )
        old_cols = combined.values[:, : fitted.X.n_items]
        new_cols = combined.values[:, fitted.X.n_items :]

    if fitted.config.linkage is Linkage.ITEM_FROM_PERSON:
        dead = [
            new_ids[j]
            for j in range(len(new_ids))
            if not (new_cols[:, j] == 1).any()
        ]
        if dead:
            raise DegenerateItemError(
                "item-from-person linkage cannot place new item(s) with no "
                f"positive responses: {dead}"
            )

    units = _run_item_chains(
        new_ids,
        new_cols,
        old_cols,
        fitted,
        person_positions,
        theta,
        mcmc,
        partial=partial,
    )

    refreshed_persons = None
    refreshed_items = None
    if partial and case.kind is NewDataKind.NEW_PERSONS_WITH_NEW_ITEMS:
        # Re-sample the new persons with the new items in their networks.
        item_pos_all = np.vstack(
            [fitted.item_positions]
            + [units[i].position_mean[None, :] for i in new_ids]
        )
        full_rows = NewResponses(
            np.hstack([old_cols, new_cols]),
            case.payload.person_ids,
            tuple(fitted.X.item_ids) + new_ids,
        )
        persons_result = sample_new_persons(
            full_rows, fitted, mcmc, item_positions=item_pos_all
        )
    if partial:
        refreshed_persons, refreshed_items = _refresh_derived(
            case, fitted, units, persons_result, new_ids, new_cols
        )

    return NewItemsResult(
        units=units,
        policy=case.update_policy,
        persons=persons_result,
        refreshed_person_positions=refreshed_persons,
        refreshed_item_positions=refreshed_items,
    )


def _run_item_chains(
    new_ids: tuple[str, ...],
    new_cols: np.ndarray,
    old_cols: np.ndarray,
    fitted: FittedModel,
    person_positions: np.ndarray,
    theta: np.ndarray,
    mcmc: McmcConfig,
    *,
    partial: bool,
) -> dict[str, NewUnitDraws]:
    """Joint chain over all new items.

    Under place-only each item pairs with old items alone; under
    partial-update new-new pairs join and the items see each other's current
    positions.
    """
    enc = fitted.config.encoding
    d = fitted.config.d
    q = len(new_ids)
    rng = np.random.default_rng(np.random.SeedSequence([mcmc.seed, 0x6E657769]))

    beta_targets = []
    pos_factories = []
    for j in range(q):
        beta_targets.append(
            _item_beta_target(
                new_cols[:, j],
                person_positions,
                fitted.config.priors.sigma_beta_sq,
                enc,
            )
        )
        if partial and q > 1:
            others = np.delete(np.arange(q), j)
            partner_cols = np.hstack([old_cols, new_cols[:, others]])
        else:
            others = np.array([], dtype=int)
            partner_cols = old_cols
        pos_factories.append(
            (
                _item_position_target_factory(
                    new_cols[:, j], partner_cols, theta, fitted.sigma_sq, enc
                ),
                others,
            )
        )

    beta_blocks = [
        _MhScalar(0.0, mcmc.scales.item_intercept, mcmc.adaptation) for _ in range(q)
    ]
    pos_blocks = [
        _MhVector(
            rng.normal(0.0, math.sqrt(fitted.sigma_sq), d),
            mcmc.scales.position,
            mcmc.adaptation,
        )
        for _ in range(q)
    ]

    n_keep = mcmc.retained_count
    beta_draws = np.empty((n_keep, q))
    pos_draws = np.empty((n_keep, q, d))
    interacting = partial and q > 1
    kept = 0
    for it in range(1, mcmc.total_iterations + 1):
        for j in range(q):
            beta_blocks[j].step(beta_targets[j], rng)
            target, others = pos_factories[j]
            current = np.array([pos_blocks[o].value for o in others]).reshape(-1, d)
            partners = np.vstack([fitted.item_positions, current])
            if interacting:
                pos_blocks[j].invalidate()  # partners may have moved
            pos_blocks[j].step(lambda w: target(w, partners), rng)
        in_burn = it <= mcmc.burn_in
        if in_burn and it % mcmc.adaptation.window == 0:
            for j in range(q):
                beta_blocks[j].adapt()
                pos_blocks[j].adapt()
        if not in_burn and (it - mcmc.burn_in) % mcmc.thinning == 0:
            beta_draws[kept] = [b.value for b in beta_blocks]
            pos_draws[kept] = [b.value for b in pos_blocks]
            kept += 1

    return {
        new_ids[j]: NewUnitDraws(new_ids[j], "item", beta_draws[:, j], pos_draws[:, j])
        for j in range(q)
    }


def _refresh_derived(
    case: NewDataCase,
    fitted: FittedModel,
    units: dict[str, NewUnitDraws],
    persons_result: NewPersonsResult | None,
    new_ids: tuple[str, ...],
    new_cols: np.ndarray,
) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Partial-update reporting: re-derive the linkage-derived positions of
    the ORIGINAL units over the joint unit set.

    Only the side whose averaging inputs actually grew is refreshed: derived
    item positions pick up new persons (case 2, item-from-person), derived
    person positions pick up new items (person-from-item).  The fitted model
    itself is never modified.
    """
    linkage = fitted.config.linkage
    eps = fitted.config.epsilon
    p_fit = fitted.X.n_items
    if linkage is Linkage.ITEM_FROM_PERSON:
        if case.kind is not NewDataKind.NEW_PERSONS_WITH_NEW_ITEMS:
            return None, None  # same persons: derived items have the same inputs
        new_z = np.vstack([u.position_mean for u in persons_result.units.values()])
        z_all = np.vstack([fitted.person_positions, new_z])
        old_item_cols = np.vstack(
            [fitted.X.values, case_rows_common(case, fitted)]
        )
        pos01 = (old_item_cols == 1).astype(float)
        counts = pos01.sum(axis=0)
        items = (pos01.T @ z_all) / counts[:, None]
        return None, items
    # person-from-item: original persons' derived positions now average over
    # the enlarged item set (their responses to unanswered new items are
    # missing, which drops out of the average naturally).
    w_all = np.vstack(
        [fitted.item_positions]
        + [units[i].position_mean[None, :] for i in new_ids]
    )
    if case.kind is NewDataKind.NEW_PERSONS_WITH_NEW_ITEMS:
        ext = np.full((fitted.X.n_persons, len(new_ids)), MISSING, dtype=np.int8)
    else:
        ext = new_cols
    rows = np.hstack([fitted.X.values, ext])
    pos01 = (rows == 1).astype(float)
    persons = (pos01 @ w_all) / (eps + pos01.sum(axis=1))[:, None]
    return persons, None


def case_rows_common(case: NewDataCase, fitted: FittedModel) -> np.ndarray:
    """Payload responses to the fitted items, columns in fitted order."""
    order = [case.payload.item_ids.index(i) for i in fitted.X.item_ids]
    return case.payload.values[:, order]

"""Incremental evaluation of the pairwise-network log-posterior.

The two likelihood blocks sum, over every item and unordered person pair and
over every person and unordered item pair, a Bernoulli log-term whose linear
predictor is an intercept minus a latent distance.  Grouping terms by pair
turns each block into

    value(pair) = weighted_edge_sum - edge_count * distance - lse_sum(distance)

where the first two pieces are cheap data aggregates and ``lse_sum`` needs one
log1p(exp(.)) per (pair, opposite-axis unit).  The engine caches per-pair
values so a proposal only recomputes pairs it touches, including every pair
whose derived endpoint moves with a free-position row.

Worker parallelism only splits the lse grids into fixed-size column chunks;
chunk boundaries and reduction order never depend on the worker count, so
results are bitwise identical for any ``workers`` value.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .data import ResponseMatrix, encode_pairs_array
from .model import (
    Linkage,
    LogPosterior,
    ModelConfig,
    ParameterState,
    log_prior_parts,
    validate_for_linkage,
)

# Target element count per lse chunk; large enough to amortize numpy call
# overhead, small enough to keep temporaries cache-friendly.
_CHUNK_ELEMS = 131072


def log1p_exp(x: np.ndarray) -> np.ndarray:
    """Stable elementwise log(1 + exp(x))."""
    out = np.abs(x)
    np.negative(out, out=out)
    np.exp(out, out=out)
    np.log1p(out, out=out)
    out += np.maximum(x, 0.0)
    return out


def _log1p_exp_inplace(x: np.ndarray, scratch: np.ndarray) -> np.ndarray:
    """log1p_exp overwriting ``x``, with the positive part staged in
    ``scratch``; identical arithmetic to :func:`log1p_exp`."""
    np.maximum(x, 0.0, out=scratch)
    np.abs(x, out=x)
    np.negative(x, out=x)
    np.exp(x, out=x)
    np.log1p(x, out=x)
    x += scratch
    return x


def pair_indices(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Upper-triangle pair endpoints in lexicographic order."""
    return np.triu_indices(m, k=1)


def _pair_index_of(a: np.ndarray, b: np.ndarray, m: int) -> np.ndarray:
    """Flat pair index for endpoint arrays with a < b elementwise."""
    return a * (2 * m - a - 1) // 2 + (b - a - 1)


def _row_pair_table(m: int) -> np.ndarray:
    """(m, m-1) table: row r lists flat indices of all pairs containing r,
    ordered by the other endpoint ascending."""
    out = np.empty((m, m - 1), dtype=np.int64)
    idx = np.arange(m, dtype=np.int64)
    for r in range(m):
        others = np.concatenate([idx[:r], idx[r + 1 :]])
        a = np.minimum(others, r)
        b = np.maximum(others, r)
        out[r] = _pair_index_of(a, b, m)
    return out


class _ChunkRunner:
    """Maps a function over column chunks, serially or on a thread pool.

    Chunk boundaries depend only on the problem size, so the assembled output
    is identical for any worker count.
    """

    def __init__(self, workers: int) -> None:
        self.workers = max(1, int(workers))
        self._pool: ThreadPoolExecutor | None = None

    def pool(self) -> ThreadPoolExecutor:
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.workers)
        return self._pool

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def chunks(self, n_cols: int, rows: int) -> list[slice]:
        step = max(1, _CHUNK_ELEMS // max(1, rows))
        return [slice(s, min(s + step, n_cols)) for s in range(0, n_cols, step)]

    def run(self, fn, n_cols: int, rows: int) -> list:
        sls = self.chunks(n_cols, rows)
        if self.workers == 1 or len(sls) == 1:
            return [fn(sl) for sl in sls]
        return list(self.pool().map(fn, sls))


def _col_lse_sums(
    c: np.ndarray,
    t: np.ndarray,
    obs: np.ndarray | None,
    runner: _ChunkRunner,
    scratch=None,
) -> np.ndarray:
    """out[q] = sum_k lse(c[k] - t[q]) over observed (k, q).

    Columns are never split, so each output entry is one axis-0 reduction
    regardless of chunking or worker count.  ``scratch`` optionally supplies
    reusable grid buffers for the serial small-grid path.
    """
    n_cols = t.shape[0]
    if n_cols * c.shape[0] <= _CHUNK_ELEMS:
        if scratch is not None:
            grid, aux = scratch(c.shape[0], n_cols)
            np.subtract(c[:, None], t[None, :], out=grid)
            _log1p_exp_inplace(grid, aux)
        else:
            grid = log1p_exp(c[:, None] - t[None, :])
        if obs is not None:
            grid *= obs
        return grid.sum(axis=0)
    out = np.empty(n_cols)

    def work(sl: slice) -> None:
        grid = log1p_exp(c[:, None] - t[None, sl])
        if obs is not None:
            grid *= obs[:, sl]
        out[sl] = grid.sum(axis=0)

    runner.run(work, n_cols, c.shape[0])
    return out


def _row_lse_sums(
    c: np.ndarray,
    t: np.ndarray,
    obs: np.ndarray | None,
    runner: _ChunkRunner,
) -> np.ndarray:
    """out[k] = sum_q lse(c[k] - t[q]) over observed (k, q).

    Chunk partials are accumulated in chunk order after all chunks finish.
    """

    def work(sl: slice) -> np.ndarray:
        grid = log1p_exp(c[:, None] - t[None, sl])
        if obs is not None:
            grid *= obs[:, sl]
        return grid.sum(axis=1)

    partials = runner.run(work, t.shape[0], c.shape[0])
    out = np.zeros(c.shape[0])
    for part in partials:
        out += part
    return out


def _flat_distances(pos: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = pos[a] - pos[b]
    return np.sqrt(np.einsum("qd,qd->q", diff, diff))


class PosteriorEngine:
    """Caches one parameter state and evaluates posterior deltas against it.

    The engine owns a copy of the state it was built from; proposals are
    evaluated with ``*_delta(s)`` and applied with the matching ``commit``.
    """

    def __init__(
        self,
        X: ResponseMatrix,
        config: ModelConfig,
        state: ParameterState,
        *,
        workers: int = 1,
    ) -> None:
        state.check_shapes(X, config)
        validate_for_linkage(X, config)
        self.X = X
        self.config = config
        self.state = state.copy()
        self.runner = _ChunkRunner(workers)
        self.item_linked = config.linkage is Linkage.ITEM_FROM_PERSON

        n, p = X.n_persons, X.n_items
        self.n, self.p = n, p
        vals = X.values
        self.has_missing = X.has_missing

        # Flat pair structures for both axes.
        self.pk, self.pl = pair_indices(n)
        self.qi, self.qj = pair_indices(p)
        self.n_ppairs = self.pk.shape[0]
        self.n_ipairs = self.qi.shape[0]
        self._person_rowpairs = _row_pair_table(n)
        self._item_rowpairs = _row_pair_table(p)
        idx_n = np.arange(n, dtype=np.int64)
        idx_p = np.arange(p, dtype=np.int64)
        self._person_others = [np.delete(idx_n, r) for r in range(n)]
        self._item_others = [np.delete(idx_p, r) for r in range(p)]

        # Edge grids: y is (p, person-pairs), u is (n, item-pairs).
        enc = config.encoding
        y = encode_pairs_array(vals[self.pk].T, vals[self.pl].T, enc)
        u = encode_pairs_array(vals[:, self.qi], vals[:, self.qj], enc)
        self.y_pos = (y == 1).astype(np.float64)
        self.u_pos = (u == 1).astype(np.float64)
        self.y_obs = (y != -1).astype(np.float64) if self.has_missing else None
        self.u_obs = (u != -1).astype(np.float64) if self.has_missing else None

        # Data aggregates.
        self.Sy = self.y_pos.sum(axis=0)  # 1-edges per person pair
        self.Su = self.u_pos.sum(axis=0)  # 1-edges per item pair
        self.Ty = self.y_pos.sum(axis=1)  # 1-edges per item network
        self.Tu = self.u_pos.sum(axis=1)  # 1-edges per person network

        # Linkage plumbing: weights of the free side in each derived row.
        pos01 = (vals == 1).astype(np.float64)
        if self.item_linked:
            self.den_derived = pos01.sum(axis=0)  # per item
            self._moved_by_row = [np.flatnonzero(vals[r] == 1) for r in range(n)]
            inset = np.zeros(p, dtype=bool)
            self._affected_by_row = []
            for r in range(n):
                inset[:] = False
                inset[self._moved_by_row[r]] = True
                self._affected_by_row.append(
                    np.flatnonzero(inset[self.qi] | inset[self.qj])
                )
        else:
            self.den_derived = config.epsilon + pos01.sum(axis=1)  # per person
            self._moved_by_row = [np.flatnonzero(vals[:, i] == 1) for i in range(p)]
            inset = np.zeros(n, dtype=bool)
            self._affected_by_row = []
            for i in range(p):
                inset[:] = False
                inset[self._moved_by_row[i]] = True
                self._affected_by_row.append(
                    np.flatnonzero(inset[self.pk] | inset[self.pl])
                )
        self._pos01 = pos01
        self._pending = None
        self._scratch_a = np.empty(0)
        self._scratch_b = np.empty(0)
        self.resync()

    def _grid_scratch(self, rows: int, cols: int):
        """Reusable C-contiguous grid buffers for serial small-grid work."""
        need = rows * cols
        if self._scratch_a.size < need:
            self._scratch_a = np.empty(need)
            self._scratch_b = np.empty(need)
        return (
            self._scratch_a[:need].reshape(rows, cols),
            self._scratch_b[:need].reshape(rows, cols),
        )

    # -- exact rebuild ----------------------------------------------------

    def resync(self) -> None:
        """Recompute every cache exactly from the current state."""
        free = self.state.free_positions
        if self.item_linked:
            self.derived_num = self._pos01.T @ free
            self.P = free
            self.Q = self.derived_num / self.den_derived[:, None]
        else:
            self.derived_num = self._pos01 @ free
            self.Q = free
            self.P = self.derived_num / self.den_derived[:, None]
        self.Dp = _flat_distances(self.P, self.pk, self.pl)
        self.Ei = _flat_distances(self.Q, self.qi, self.qj)
        self.Bb = self.state.item_intercepts @ self.y_pos
        self.At = self.state.person_intercepts @ self.u_pos
        self.Yval = self._y_pair_values(self.Dp, None)
        self.Uval = self._u_pair_values(self.Ei, None)
        self.ll_y = float(self.Yval.sum())
        self.ll_u = float(self.Uval.sum())
        self._pending = None

    def _y_pair_values(
        self, dists: np.ndarray, pair_idx: np.ndarray | None
    ) -> np.ndarray:
        """Per person-pair Y-block values at the given distances."""
        beta = self.state.item_intercepts
        if pair_idx is None:
            obs = self.y_obs
            sy, bb = self.Sy, self.Bb
        else:
            obs = None if self.y_obs is None else self.y_obs[:, pair_idx]
            sy, bb = self.Sy[pair_idx], self.Bb[pair_idx]
        lse = _col_lse_sums(beta, dists, obs, self.runner, self._grid_scratch)
        return bb - sy * dists - lse

    def _u_pair_values(
        self, dists: np.ndarray, pair_idx: np.ndarray | None
    ) -> np.ndarray:
        """Per item-pair U-block values at the given distances."""
        theta = self.state.person_intercepts
        if pair_idx is None:
            obs = self.u_obs
            su, at = self.Su, self.At
        else:
            obs = None if self.u_obs is None else self.u_obs[:, pair_idx]
            su, at = self.Su[pair_idx], self.At[pair_idx]
        lse = _col_lse_sums(theta, dists, obs, self.runner, self._grid_scratch)
        return at - su * dists - lse

    # -- reporting ---------------------------------------------------------

    def log_prior(self) -> float:
        return log_prior_parts(self.state, self.X, self.config)

    def parts(self) -> LogPosterior:
        return LogPosterior(self.ll_y, self.ll_u, self.log_prior())

    def total(self) -> float:
        return self.ll_y + self.ll_u + self.log_prior()

    def sum_sq_positions(self) -> float:
        free = self.state.free_positions
        return float(np.sum(free * free))

    def person_positions(self) -> np.ndarray:
        return self.P.copy()

    def item_positions(self) -> np.ndarray:
        return self.Q.copy()

    def close(self) -> None:
        self.runner.close()

    # -- free-position row moves -------------------------------------------

    def _free_role(self):
        """(positions, rowpairs, others, pair_values, dist, cache) of the
        free axis plus the mirrored bundle for the derived axis."""
        if self.item_linked:
            return (
                (self.P, self._person_rowpairs, self._person_others,
                 self._y_pair_values, self.Dp, self.Yval),
                (self.Q, self.qi, self.qj, self._u_pair_values, self.Ei, self.Uval),
            )
        return (
            (self.Q, self._item_rowpairs, self._item_others,
             self._u_pair_values, self.Ei, self.Uval),
            (self.P, self.pk, self.pl, self._y_pair_values, self.Dp, self.Yval),
        )

    def position_delta(self, r: int, new_row: np.ndarray) -> float:
        """Posterior delta for replacing free-position row ``r``.

        Re-derives every linked position that averages over row ``r`` and
        revisits exactly the pairs whose distances change.
        """
        new_row = np.asarray(new_row, dtype=np.float64)
        free, other = self._free_role()
        delta, pending = self._move_free_row(r, new_row, free, other)
        self._pending = pending
        return delta

    def _move_free_row(self, r, new_row, free, other):
        free_pos, rowpairs, others_tab, free_pair_values, _, free_cache = free
        other_pos, pa, pb, other_pair_values, _, other_cache = other
        old_row = free_pos[r]
        drow = new_row - old_row

        # Pairs of the free axis that contain row r.
        jl = rowpairs[r]
        diff = new_row[None, :] - free_pos[others_tab[r]]
        d_new = np.sqrt(np.einsum("qd,qd->q", diff, diff))
        vals_free = free_pair_values(d_new, jl)
        delta = float(vals_free.sum()) - float(free_cache[jl].sum())

        # Derived rows that average over row r, and the pairs they touch.
        moved = self._moved_by_row[r]
        if moved.size:
            num_new = self.derived_num[moved] + drow[None, :]
            derived_new = num_new / self.den_derived[moved, None]
            tmp = other_pos.copy()
            tmp[moved] = derived_new
            ap = self._affected_by_row[r]
            e_new = _flat_distances(tmp, pa[ap], pb[ap])
            vals_other = other_pair_values(e_new, ap)
            delta += float(vals_other.sum()) - float(other_cache[ap].sum())
        else:
            derived_new = None
            e_new = None
            vals_other = None

        delta -= (float(new_row @ new_row) - float(old_row @ old_row)) / (
            2.0 * self.state.sigma_sq
        )
        pending = (r, new_row, drow, jl, d_new, vals_free, moved, derived_new,
                   e_new, vals_other)
        return delta, pending

    def commit_position(self) -> None:
        pend = self._pending
        assert pend is not None
        free, other = self._free_role()
        self._commit_move(pend, free, other)
        self._pending = None

    def _commit_move(self, pend, free, other) -> None:
        (r, new_row, drow, jl, d_new, vals_free, moved, derived_new,
         e_new, vals_other) = pend
        free_pos, _, _, _, free_dist, free_cache = free
        other_pos, _, _, _, other_dist, other_cache = other

        self._update_pair_cache(free_cache, jl, vals_free)
        free_pos[r] = new_row
        free_dist[jl] = d_new
        self.state.free_positions[r] = new_row
        if moved.size:
            self.derived_num[moved] += drow
            other_pos[moved] = derived_new
            ap = self._affected_by_row[r]
            other_dist[ap] = e_new
            self._update_pair_cache(other_cache, ap, vals_other)

    def position_block(
        self, scale: float, rng: np.random.Generator, order
    ) -> int:
        """One sequential Metropolis pass over every free-position row.

        Consumes, per row, d proposal normals and one uniform from ``rng``;
        returns the accepted count.
        """
        free, other = self._free_role()
        free_positions = self.state.free_positions
        d = free_positions.shape[1]
        accepted = 0
        for r in order:
            new_row = free_positions[r] + scale * rng.standard_normal(d)
            delta, pending = self._move_free_row(r, new_row, free, other)
            if np.log(rng.random()) < delta:
                self._commit_move(pending, free, other)
                accepted += 1
        return accepted

    def _update_pair_cache(
        self, cache: np.ndarray, idx: np.ndarray, new_vals: np.ndarray
    ) -> None:
        change = float(new_vals.sum()) - float(cache[idx].sum())
        if cache is self.Yval:
            self.ll_y += change
        else:
            self.ll_u += change
        cache[idx] = new_vals

    # -- intercept blocks ----------------------------------------------------

    def person_intercept_deltas(self, proposed: np.ndarray) -> np.ndarray:
        """Per-person posterior deltas for jointly proposed intercepts.

        Person intercepts never interact given fixed positions, so the block
        is evaluated in one pass and each entry can be accepted independently.
        """
        theta = self.state.person_intercepts
        lse_old = _row_lse_sums(theta, self.Ei, self.u_obs, self.runner)
        lse_new = _row_lse_sums(proposed, self.Ei, self.u_obs, self.runner)
        dtheta = proposed - theta
        prior = (proposed**2 - theta**2) / (2.0 * self.config.priors.sigma_theta_sq)
        return self.Tu * dtheta - (lse_new - lse_old) - prior

    def commit_person_intercepts(
        self, accept: np.ndarray, proposed: np.ndarray
    ) -> None:
        acc = np.flatnonzero(accept)
        if acc.size == 0:
            return
        theta = self.state.person_intercepts
        dtheta = proposed[acc] - theta[acc]
        grid_old = log1p_exp(theta[acc, None] - self.Ei[None, :])
        grid_new = log1p_exp(proposed[acc, None] - self.Ei[None, :])
        if self.u_obs is not None:
            grid_old *= self.u_obs[acc]
            grid_new *= self.u_obs[acc]
        at_change = dtheta @ self.u_pos[acc]
        dvals = at_change - (grid_new - grid_old).sum(axis=0)
        self.At += at_change
        self.Uval += dvals
        self.ll_u += float(dvals.sum())
        theta[acc] = proposed[acc]

    def item_intercept_deltas(self, proposed: np.ndarray) -> np.ndarray:
        """Per-item posterior deltas; mirror of the person block."""
        beta = self.state.item_intercepts
        lse_old = _row_lse_sums(beta, self.Dp, self.y_obs, self.runner)
        lse_new = _row_lse_sums(proposed, self.Dp, self.y_obs, self.runner)
        dbeta = proposed - beta
        prior = (proposed**2 - beta**2) / (2.0 * self.config.priors.sigma_beta_sq)
        return self.Ty * dbeta - (lse_new - lse_old) - prior

    def commit_item_intercepts(self, accept: np.ndarray, proposed: np.ndarray) -> None:
        acc = np.flatnonzero(accept)
        if acc.size == 0:
            return
        beta = self.state.item_intercepts
        dbeta = proposed[acc] - beta[acc]
        grid_old = log1p_exp(beta[acc, None] - self.Dp[None, :])
        grid_new = log1p_exp(proposed[acc, None] - self.Dp[None, :])
        if self.y_obs is not None:
            grid_old *= self.y_obs[acc]
            grid_new *= self.y_obs[acc]
        bb_change = dbeta @ self.y_pos[acc]
        dvals = bb_change - (grid_new - grid_old).sum(axis=0)
        self.Bb += bb_change
        self.Yval += dvals
        self.ll_y += float(dvals.sum())
        beta[acc] = proposed[acc]

    # -- variance ------------------------------------------------------------

    def set_sigma_sq(self, value: float) -> None:
        self.state.sigma_sq = float(value)

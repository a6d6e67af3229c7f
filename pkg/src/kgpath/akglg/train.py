"""Full-softmax training of AKGLG embeddings with an N3 penalty and Adagrad.

Sign and circle models are trained in their composed (DistMult / ComplEx)
form and decomposed afterwards; the line group is trained directly on
attention and translation parameters with ``w = u**2`` keeping attentions
non-negative.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from ..kg import KnowledgeGraph
from .groups import GroupInstance, get_group
from .model import AkglgModel, decompose

logger = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"loss became non-finite ({loss}) at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 100
    reg: float = 0.01
    learning_rate: float = 0.1
    epochs: int = 25
    batch_size: int = 1000
    init_scale: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        for name in ("dim", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("learning_rate", "init_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.reg < 0:
            raise ValueError("reg must be non-negative")


def _logsoftmax_grad(scores: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over rows and its gradient w.r.t. ``scores``."""
    B = len(targets)
    m = scores.max(axis=1, keepdims=True)
    e = np.exp(scores - m)
    z = e.sum(axis=1, keepdims=True)
    lse = np.log(z)[:, 0] + m[:, 0]
    loss = float(np.mean(lse - scores[np.arange(B), targets]))
    d = e / z
    d[np.arange(B), targets] -= 1.0
    d /= B
    return loss, d


class _DistMultForm:
    """Real composed vectors; score ``sum(h * r * t)``."""

    n_blocks = 1

    def init(self, rng, n_ent, n_rel, dim, scale):
        return {"ent": rng.standard_normal((n_ent, dim)) * scale,
                "rel": rng.standard_normal((n_rel, dim)) * scale}

    def loss_grad(self, p, batch, reg):
        E, Rm = p["ent"], p["rel"]
        h, r, t = batch[:, 0], batch[:, 1], batch[:, 2]
        B = len(batch)
        hv, rv = E[h], Rm[r]
        q = hv * rv
        loss, dS = _logsoftmax_grad(q @ E.T, t)
        gE = dS.T @ q
        dq = dS @ E
        gE_h = dq * rv
        gR_r = dq * hv
        c = reg / B
        tv = E[t]
        loss += c * float(np.sum(np.abs(hv) ** 3) + np.sum(np.abs(rv) ** 3) + np.sum(np.abs(tv) ** 3))
        gE_h += 3 * c * np.abs(hv) * hv
        gR_r += 3 * c * np.abs(rv) * rv
        np.add.at(gE, h, gE_h)
        np.add.at(gE, t, 3 * c * np.abs(tv) * tv)
        gR = np.zeros_like(Rm)
        np.add.at(gR, r, gR_r)
        return loss, {"ent": gE, "rel": gR}

    def to_model(self, p, group):
        return decompose(group, p["ent"], p["rel"])


class _ComplExForm:
    """Complex composed vectors stored as ``[re | im]``; score ``Re(sum(h * r * conj(t)))``."""

    def init(self, rng, n_ent, n_rel, dim, scale):
        return {"ent": rng.standard_normal((n_ent, 2 * dim)) * scale,
                "rel": rng.standard_normal((n_rel, 2 * dim)) * scale}

    @staticmethod
    def _halves(x):
        n = x.shape[1] // 2
        return x[:, :n], x[:, n:]

    @staticmethod
    def _n3(x):
        re, im = _ComplExForm._halves(x)
        mod = np.sqrt(re * re + im * im)
        return float(np.sum(mod ** 3)), 3 * np.concatenate([mod * re, mod * im], axis=1)

    def loss_grad(self, p, batch, reg):
        E, Rm = p["ent"], p["rel"]
        h, r, t = batch[:, 0], batch[:, 1], batch[:, 2]
        B = len(batch)
        hv, rv, tv = E[h], Rm[r], E[t]
        hr, hi = self._halves(hv)
        rr, ri = self._halves(rv)
        er, ei = self._halves(E)
        qr = hr * rr - hi * ri
        qi = hr * ri + hi * rr
        loss, dS = _logsoftmax_grad(qr @ er.T + qi @ ei.T, t)
        gE = np.concatenate([dS.T @ qr, dS.T @ qi], axis=1)
        dqr = dS @ er
        dqi = dS @ ei
        gE_h = np.concatenate([dqr * rr + dqi * ri, -dqr * ri + dqi * rr], axis=1)
        gR_r = np.concatenate([dqr * hr + dqi * hi, -dqr * hi + dqi * hr], axis=1)
        c = reg / B
        nh, dh = self._n3(hv)
        nr, dr = self._n3(rv)
        nt, dt = self._n3(tv)
        loss += c * (nh + nr + nt)
        np.add.at(gE, h, gE_h + c * dh)
        np.add.at(gE, t, c * dt)
        gR = np.zeros_like(Rm)
        np.add.at(gR, r, gR_r + c * dr)
        return loss, {"ent": gE, "rel": gR}

    def to_model(self, p, group):
        er, ei = self._halves(p["ent"])
        rr, ri = self._halves(p["rel"])
        return decompose(group, er + 1j * ei, rr + 1j * ri)


class _TranslationForm:
    """Line group: ``score = -sum(w_h w_r w_t (g_h + g_r - g_t)^2)`` with ``w = u^2``."""

    def init(self, rng, n_ent, n_rel, dim, scale):
        return {"ent_u": 1.0 + rng.standard_normal((n_ent, dim)) * scale,
                "ent_g": rng.standard_normal((n_ent, dim)) * scale,
                "rel_u": 1.0 + rng.standard_normal((n_rel, dim)) * scale,
                "rel_g": rng.standard_normal((n_rel, dim)) * scale}

    def loss_grad(self, p, batch, reg):
        h, r, t = batch[:, 0], batch[:, 1], batch[:, 2]
        B = len(batch)
        ue, ge, ur, gr = p["ent_u"], p["ent_g"], p["rel_u"], p["rel_g"]
        we = ue * ue
        wh, wr = we[h], ur[r] * ur[r]
        W = wh * wr
        q = ge[h] + gr[r]
        A, Bm = W * q * q, W * q
        weg = we * ge
        weg2 = weg * ge
        S = -(A @ we.T) + 2.0 * (Bm @ weg.T) - W @ weg2.T
        loss, dS = _logsoftmax_grad(S, t)
        dA = -(dS @ we)
        dB = 2.0 * (dS @ weg)
        dC = -(dS @ weg2)
        SB = dS.T @ Bm
        SC = dS.T @ W
        g_we = -(dS.T @ A) + 2.0 * SB * ge - SC * ge * ge
        g_ge = 2.0 * SB * we - 2.0 * SC * we * ge
        dW = dA * q * q + dB * q + dC
        dq = 2.0 * dA * W * q + dB * W
        g_wh = dW * wr
        g_wr = dW * wh
        c = reg / B
        loss += c * float(sum(np.sum(np.abs(x) ** 3) for x in (ue[h], ge[h], ur[r], gr[r], ue[t], ge[t])))
        g_ue = g_we * 2.0 * ue
        np.add.at(g_ue, h, g_wh * 2.0 * ue[h] + 3 * c * np.abs(ue[h]) * ue[h])
        np.add.at(g_ue, t, 3 * c * np.abs(ue[t]) * ue[t])
        np.add.at(g_ge, h, dq + 3 * c * np.abs(ge[h]) * ge[h])
        np.add.at(g_ge, t, 3 * c * np.abs(ge[t]) * ge[t])
        g_ur = np.zeros_like(ur)
        g_gr = np.zeros_like(gr)
        np.add.at(g_ur, r, g_wr * 2.0 * ur[r] + 3 * c * np.abs(ur[r]) * ur[r])
        np.add.at(g_gr, r, dq + 3 * c * np.abs(gr[r]) * gr[r])
        return loss, {"ent_u": g_ue, "ent_g": g_ge, "rel_u": g_ur, "rel_g": g_gr}

    def to_model(self, p, group):
        return AkglgModel(group, p["ent_u"] ** 2, p["ent_g"].copy(), p["rel_u"] ** 2, p["rel_g"].copy())


_FORMS = {"sign": _DistMultForm, "circle": _ComplExForm, "line": _TranslationForm}


def parametrization(group: GroupInstance):
    return _FORMS[group.kind]()


def loss_and_grad(group: GroupInstance, params: dict, batch: np.ndarray, reg: float):
    """Mean full-softmax cross-entropy plus ``reg * N3 / batch`` and its gradient."""
    return parametrization(group).loss_grad(params, np.asarray(batch), reg)


def attention_gradient(composed: np.ndarray, grad: np.ndarray, group: GroupInstance) -> np.ndarray:
    """Chain a gradient on composed vectors onto the attention vectors.

    With ``c = w * g`` and ``g`` fixed, ``dL/dw = Re(conj(g) dL/dc)``; zero
    coordinates use the identity point.
    """
    if group.kind == "circle":
        n = composed.shape[1] // 2
        c = composed[:, :n] + 1j * composed[:, n:]
        gc = grad[:, :n] + 1j * grad[:, n:]
    else:
        c, gc = composed, grad
    mod = np.abs(c)
    pts = group.identity(c.shape)
    nz = mod > 0
    pts[nz] = c[nz] / mod[nz]
    return np.real(np.conj(pts) * gc)


def train(kg: KnowledgeGraph, group: GroupInstance | str, config: TrainConfig,
          callback=None, init_params: dict | None = None) -> AkglgModel:
    """Train on tail-prediction queries of the augmented train split.

    Head prediction is covered by the inverse triples.  Each epoch shuffles the
    training triples with a generator seeded from ``config.seed``; the
    returned model's ``history`` holds the mean loss of every epoch.
    """
    if isinstance(group, str):
        group = get_group(group)
    if not kg.augmented:
        raise ValueError("train needs an augmented knowledge graph")
    form = parametrization(group)
    rng = np.random.default_rng(config.seed)
    params = init_params if init_params is not None else form.init(
        rng, kg.n_entities, kg.n_relations, config.dim, config.init_scale)
    accum = {k: np.zeros_like(v) for k, v in params.items()}
    triples = kg.train
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(triples))
        total, count = 0.0, 0
        for bi, start in enumerate(range(0, len(order), config.batch_size)):
            batch = triples[order[start:start + config.batch_size]]
            loss, grads = form.loss_grad(params, batch, config.reg)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, bi, loss)
            for k, g in grads.items():
                accum[k] += g * g
                params[k] -= config.learning_rate * g / (np.sqrt(accum[k]) + 1e-10)
            total += loss * len(batch)
            count += len(batch)
        history.append(total / count)
        logger.debug("epoch %d loss %.6f", epoch, history[-1])
        if callback is not None:
            callback(epoch, history[-1], params)
    model = form.to_model(params, group)
    model.entities = kg.entities
    model.relations = kg.relations
    model.meta = {"train_config": asdict(config), "group": group.kind}
    model.history = history
    return model

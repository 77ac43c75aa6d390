"""Grouped-encoder MLPs with hand-written backprop, plus Adam.

Both actor and critic share one layout: the 4-dim ego block and the 30-dim
social block each pass through their own two-layer ReLU encoder, the two
encodings are concatenated (the critic appends the action here) and a
fully-connected head maps them to the output. Actor outputs go through a
sigmoid so each component stays in [0, 1].
"""
from __future__ import annotations

import numpy as np

EGO_DIM = 4
SOCIAL_DIM = 30
OBS_DIM = EGO_DIM + SOCIAL_DIM
ACTION_DIM = 2


def default_input_scale() -> np.ndarray:
    """Fixed, non-trainable per-feature scaling of raw observations."""
    scale = np.ones(OBS_DIM)
    scale[0] = 0.1
    block = np.array([0.1, 0.1, 0.02, 0.02, 1.0, 1.0])
    scale[EGO_DIM:] = np.tile(block, SOCIAL_DIM // 6)
    return scale


def _relu(x):
    return np.maximum(x, 0.0)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class Network:
    """Actor (``kind="actor"``) or critic (``kind="critic"``) network.

    Parameters are kept in one list in declaration order:
    ego encoder (W, b, W, b), social encoder (W, b, W, b), head (W, b, W, b).
    Weights are stored as ``(fan_in, fan_out)`` so a batch forward is ``x @ W + b``.
    """

    def __init__(self, kind: str = "actor", hidden: int = 64, rng=None,
                 input_scale: np.ndarray | None = None, dtype=np.float64):
        if kind not in ("actor", "critic"):
            raise ValueError(f"unknown network kind {kind!r}")
        rng = np.random.default_rng(rng)
        self.kind = kind
        self.hidden = hidden
        self.dtype = np.dtype(dtype)
        scale = default_input_scale() if input_scale is None else input_scale
        self.input_scale = np.asarray(scale, dtype=self.dtype)
        head_in = 2 * hidden + (ACTION_DIM if kind == "critic" else 0)
        out = ACTION_DIM if kind == "actor" else 1
        shapes = [(EGO_DIM, hidden), (hidden, hidden),
                  (SOCIAL_DIM, hidden), (hidden, hidden),
                  (head_in, hidden), (hidden, out)]
        self.params = []
        for fan_in, fan_out in shapes:
            bound = 1.0 / np.sqrt(fan_in)
            self.params.append(rng.uniform(-bound, bound, (fan_in, fan_out)).astype(self.dtype))
            self.params.append(rng.uniform(-bound, bound, fan_out).astype(self.dtype))
        self._cache = None

    @property
    def shapes(self):
        return [p.shape for p in self.params]

    def copy(self) -> "Network":
        twin = object.__new__(Network)
        twin.kind, twin.hidden, twin.dtype = self.kind, self.hidden, self.dtype
        twin.input_scale = self.input_scale.copy()
        twin.params = [p.copy() for p in self.params]
        twin._cache = None
        return twin

    def forward(self, obs, action=None) -> np.ndarray:
        """Evaluate on one observation (34,) or a batch (B, 34).

        The critic additionally needs ``action`` of shape (2,) or (B, 2).
        """
        obs = np.asarray(obs, dtype=self.dtype)
        single = obs.ndim == 1
        x = obs[None, :] if single else obs
        if x.shape[-1] != OBS_DIM:
            raise ValueError(f"expected observation length {OBS_DIM}, got {x.shape[-1]}")
        if (self.kind == "critic") != (action is not None):
            raise ValueError("critic needs an action; actor takes none")
        x = x * self.input_scale
        eW1, eb1, eW2, eb2, sW1, sb1, sW2, sb2, hW1, hb1, hW2, hb2 = self.params
        xe, xs = x[:, :EGO_DIM], x[:, EGO_DIM:]
        ze1 = xe @ eW1 + eb1
        ae1 = _relu(ze1)
        ze2 = ae1 @ eW2 + eb2
        ae2 = _relu(ze2)
        zs1 = xs @ sW1 + sb1
        as1 = _relu(zs1)
        zs2 = as1 @ sW2 + sb2
        as2 = _relu(zs2)
        parts = [ae2, as2]
        if action is not None:
            act = np.asarray(action, dtype=self.dtype)
            parts.append(act[None, :] if act.ndim == 1 else act)
        h = np.concatenate(parts, axis=1)
        zh = h @ hW1 + hb1
        ah = _relu(zh)
        pre = ah @ hW2 + hb2
        out = _sigmoid(pre) if self.kind == "actor" else pre
        self._cache = (single, xe, xs, ze1, ae1, ze2, ae2, zs1, as1, zs2, as2, h, zh, ah, out,
                       pre)
        return out[0] if single else out

    __call__ = forward

    @property
    def preactivation(self) -> np.ndarray:
        """Output-layer values before the actor sigmoid, from the last ``forward``."""
        if self._cache is None:
            raise RuntimeError("no forward pass cached")
        pre = self._cache[-1]
        return pre[0] if self._cache[0] else pre

    def backward(self, grad_out, grad_pre=None):
        """Reverse-mode pass for the most recent ``forward``.

        ``grad_pre`` optionally adds a gradient taken directly w.r.t. the
        output-layer values before the sigmoid (see ``preactivation``).
        Returns ``(param_grads, grad_obs, grad_action)``; ``grad_action`` is
        None for the actor. Gradients w.r.t. the raw (unscaled) observation.
        """
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        single, xe, xs, ze1, ae1, ze2, ae2, zs1, as1, zs2, as2, h, zh, ah, out, _ = self._cache
        eW1, eb1, eW2, eb2, sW1, sb1, sW2, sb2, hW1, hb1, hW2, hb2 = self.params
        g = np.asarray(grad_out, dtype=self.dtype)
        g = g[None, :] if single else g
        g = g.reshape(out.shape)
        if self.kind == "actor":
            g = g * out * (1.0 - out)
        if grad_pre is not None:
            gp = np.asarray(grad_pre, dtype=self.dtype)
            g = g + (gp[None, :] if single else gp).reshape(out.shape)
        d_hW2 = ah.T @ g
        d_hb2 = g.sum(0)
        g = (g @ hW2.T) * (zh > 0)
        d_hW1 = h.T @ g
        d_hb1 = g.sum(0)
        gh = g @ hW1.T
        H = self.hidden
        g_e, g_s = gh[:, :H], gh[:, H:2 * H]
        g_act = gh[:, 2 * H:] if self.kind == "critic" else None

        g_e = g_e * (ze2 > 0)
        d_eW2 = ae1.T @ g_e
        d_eb2 = g_e.sum(0)
        g_e = (g_e @ eW2.T) * (ze1 > 0)
        d_eW1 = xe.T @ g_e
        d_eb1 = g_e.sum(0)
        gx_e = g_e @ eW1.T

        g_s = g_s * (zs2 > 0)
        d_sW2 = as1.T @ g_s
        d_sb2 = g_s.sum(0)
        g_s = (g_s @ sW2.T) * (zs1 > 0)
        d_sW1 = xs.T @ g_s
        d_sb1 = g_s.sum(0)
        gx_s = g_s @ sW1.T

        grad_obs = np.concatenate([gx_e, gx_s], axis=1) * self.input_scale
        grads = [d_eW1, d_eb1, d_eW2, d_eb2, d_sW1, d_sb1, d_sW2, d_sb2,
                 d_hW1, d_hb1, d_hW2, d_hb2]
        if single:
            grad_obs = grad_obs[0]
            g_act = g_act[0] if g_act is not None else None
        return grads, grad_obs, g_act


def forward(net: Network, obs, action=None):
    return net.forward(obs, action)


def backward(net: Network, grad_out):
    return net.backward(grad_out)[0]


class Adam:
    """Adam with bias correction, updating a list of arrays in place."""

    def __init__(self, params, lr=3e-4, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads):
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

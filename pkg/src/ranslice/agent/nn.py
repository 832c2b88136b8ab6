"""Dense ReLU networks with hand-written backpropagation and an Adam optimiser."""

import numpy as np

ACT_LOW, ACT_HIGH = 0.1, 0.9


class Mlp:
    """Feed-forward net ``x -> relu(x W0 + b0) -> ... -> head(h W_last + b_last)``.

    ``head`` is ``"linear"`` (critic) or ``"squash"`` (actor: an affine
    sigmoid onto ``[ACT_LOW, ACT_HIGH]``).  Weights are stored ``(fan_in, fan_out)``.
    """

    def __init__(self, layer_dims, head="linear", rng=None, final_scale=0.01):
        if len(layer_dims) < 2:
            raise ValueError("need at least input and output dims")
        if head not in ("linear", "squash"):
            raise ValueError(f"unknown output head {head!r}")
        self.layer_dims = [int(d) for d in layer_dims]
        self.head = head
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights, self.biases = [], []
        n_layers = len(self.layer_dims) - 1
        for i, (fan_in, fan_out) in enumerate(zip(self.layer_dims[:-1], self.layer_dims[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            if i == n_layers - 1:
                bound *= final_scale
            self.weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, fan_out))

    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def set_params(self, params):
        params = list(params)
        if len(params) != 2 * len(self.weights):
            raise ValueError("parameter count mismatch")
        for i in range(len(self.weights)):
            w, b = params[2 * i], params[2 * i + 1]
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise ValueError("parameter shape mismatch")
            self.weights[i] = np.array(w, dtype=float)
            self.biases[i] = np.array(b, dtype=float)

    def copy(self):
        other = Mlp.__new__(Mlp)
        other.layer_dims = list(self.layer_dims)
        other.head = self.head
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def __call__(self, x):
        return mlp_forward(self, x)[0]


def _sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def mlp_forward(net: Mlp, x):
    """Returns (output, cache).  ``x`` is ``(in,)`` or ``(batch, in)``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != net.layer_dims[0]:
        raise ValueError(f"input dim {h.shape[1]} != {net.layer_dims[0]}")
    acts, pre = [h], []
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)
    if net.head == "squash":
        s = _sigmoid(pre[-1])
        out = ACT_LOW + (ACT_HIGH - ACT_LOW) * s
    else:
        s = None
        out = pre[-1]
    cache = {"acts": acts, "pre": pre, "sig": s, "single": single}
    return (out[0] if single else out), cache


def mlp_backward(net: Mlp, cache, output_grad):
    """Gradients of ``sum(output * output_grad)``.

    Returns (param_grads, input_grad) where ``param_grads`` follows the
    ordering of :meth:`Mlp.params`.
    """
    g = np.asarray(output_grad, dtype=float)
    if cache["single"]:
        g = g[None, :]
    if net.head == "squash":
        s = cache["sig"]
        g = g * (ACT_HIGH - ACT_LOW) * s * (1.0 - s)
    acts, pre = cache["acts"], cache["pre"]
    grads = [None] * (2 * len(net.weights))
    for i in range(len(net.weights) - 1, -1, -1):
        if i < len(net.weights) - 1:
            g = g * (pre[i] > 0)
        grads[2 * i] = acts[i].T @ g
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ net.weights[i].T
    return grads, (g[0] if cache["single"] else g)


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        """In-place descent step on ``params`` along ``grads``."""
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# --- checkpoints --------------------------------------------------------------
# Text format:
#   mlp <head> <d0> <d1> ... <dn>
#   one line per parameter array (W0, b0, W1, b1, ...), row-major, repr() floats

def save_mlp(net: Mlp, fh):
    fh.write("mlp " + net.head + " " + " ".join(str(d) for d in net.layer_dims) + "\n")
    for p in net.params():
        fh.write(" ".join(repr(float(v)) for v in p.ravel()) + "\n")


def load_mlp(fh) -> Mlp:
    header = fh.readline().split()
    if len(header) < 4 or header[0] != "mlp":
        raise ValueError(f"bad checkpoint header: {' '.join(header)!r}")
    net = Mlp([int(d) for d in header[2:]], head=header[1])
    params = []
    for p in net.params():
        line = fh.readline()
        values = np.array([float(v) for v in line.split()])
        if values.size != p.size:
            raise ValueError(f"expected {p.size} values, got {values.size}")
        params.append(values.reshape(p.shape))
    net.set_params(params)
    return net

"""Shared test helpers: independent scalar re-implementations of the cell
equations and the full stack, written with plain-Python loops so they stay
independent of the numpy code paths they check."""

import math

import numpy as np
import pytest

from amylopred.neuralnet.params import Hyperparams, init_model


def sig(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def mat_vec(W, v):
    return [sum(W[r][c] * v[c] for c in range(len(v))) for r in range(len(W))]


def scalar_lstm_step(x, h_prev, c_prev, p):
    """Per-coordinate LSTM step on python lists."""
    gates = {}
    for name, act in (("i", sig), ("f", sig), ("o", sig), ("g", math.tanh)):
        wx = mat_vec(p[f"W_{name}"].tolist(), list(x))
        uh = mat_vec(p[f"U_{name}"].tolist(), list(h_prev))
        b = p[f"b_{name}"].tolist()
        gates[name] = [act(wx[k] + uh[k] + b[k]) for k in range(len(b))]
    c = [
        gates["f"][k] * c_prev[k] + gates["i"][k] * gates["g"][k]
        for k in range(len(c_prev))
    ]
    h = [gates["o"][k] * math.tanh(c[k]) for k in range(len(c))]
    return h, c


def scalar_gru_step(x, h_prev, p):
    def gate(name, act, hv):
        wx = mat_vec(p[f"W_{name}"].tolist(), list(x))
        uh = mat_vec(p[f"U_{name}"].tolist(), list(hv))
        b = p[f"b_{name}"].tolist()
        return [act(wx[k] + uh[k] + b[k]) for k in range(len(b))]

    z = gate("z", sig, h_prev)
    r = gate("r", sig, h_prev)
    rh = [r[k] * h_prev[k] for k in range(len(h_prev))]
    hbar = gate("h", math.tanh, rh)
    return [(1.0 - z[k]) * h_prev[k] + z[k] * hbar[k] for k in range(len(h_prev))]


def scalar_bi_layer(xs, fwd_p, bwd_p, kind):
    """Bidirectional layer on lists: output t = concat(fwd state after
    xs[0..t], bwd state after xs[T-1..t])."""
    T = len(xs)
    hidden = len(fwd_p["b_i" if kind == "lstm" else "b_z"])
    hf = [0.0] * hidden
    cf = [0.0] * hidden
    outs_f = []
    for t in range(T):
        if kind == "lstm":
            hf, cf = scalar_lstm_step(xs[t], hf, cf, fwd_p)
        else:
            hf = scalar_gru_step(xs[t], hf, fwd_p)
        outs_f.append(hf)
    hb = [0.0] * hidden
    cb = [0.0] * hidden
    outs_b = [None] * T
    for t in range(T - 1, -1, -1):
        if kind == "lstm":
            hb, cb = scalar_lstm_step(xs[t], hb, cb, bwd_p)
        else:
            hb = scalar_gru_step(xs[t], hb, bwd_p)
        outs_b[t] = hb
    return [outs_f[t] + outs_b[t] for t in range(T)]


def scalar_forward(model, xs):
    """Evaluation-mode scalar oracle for the whole stack."""
    y1 = scalar_bi_layer(xs, model.lstm_fwd, model.lstm_bwd, "lstm")
    y2 = scalar_bi_layer(y1, model.gru_fwd, model.gru_bwd, "gru")
    T = len(y2)
    width = len(y2[0])
    v = [sum(y2[t][k] for t in range(T)) / T for k in range(width)]
    u = sum(model.dense_w.tolist()[k] * v[k] for k in range(width)) + float(
        model.dense_b
    )
    return sig(u)


def tiny_hyper(mode="pooled_reshape", reshape_t=4, dtype="float64", **kw):
    defaults = dict(
        input_mode=mode,
        reshape_t=reshape_t,
        lstm_hidden=4,
        gru_hidden=4,
        dropout_rate=0.0,
        dtype=dtype,
    )
    defaults.update(kw)
    return Hyperparams(**defaults)


def random_tiny_model(hyper, input_dim, seed):
    return init_model(hyper, input_dim, np.random.default_rng(seed))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ------------------------------------------------- stub embedding producer

import io
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

from amylopred.embedstore import ResidueEmbeddings, write_embeddings
from amylopred.seqcore import parse_fasta


class StubProducer(BaseHTTPRequestHandler):
    """Serves random AEMB for POST /embed; behavior knobs are class attrs."""

    dim = 7
    shuffle = False
    drop_first = False
    status = 200

    def do_POST(self):
        if self.path != "/embed":
            self.send_error(404)
            return
        body = self.rfile.read(int(self.headers["Content-Length"]))
        seqs = parse_fasta(body.decode())
        if self.drop_first:
            seqs = seqs[1:]
        if self.shuffle:
            seqs = list(reversed(seqs))
        gen = np.random.default_rng(0)
        records = [
            ResidueEmbeddings(
                s.id, gen.normal(size=(len(s), self.dim)).astype(np.float32)
            )
            for s in seqs
        ]
        buf = io.BytesIO()
        if records:
            write_embeddings(records, buf)
        payload = buf.getvalue()
        self.send_response(self.status)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def producer():
    server = HTTPServer(("127.0.0.1", 0), StubProducer)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()

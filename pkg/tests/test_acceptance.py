"""End-to-end acceptance suite.

Each test checks one acceptance criterion at its stated tolerance and
prints a single ``CRITERION <n> PASS|FAIL: ...`` line to the terminal
(visible without ``-s``). Run on its own with::

    pytest tests/test_acceptance.py -v

The federated and sweep criteria train many GANs and take several minutes.
"""

import ast
import importlib
import importlib.util
import inspect
import struct
import time

import numpy as np
import pytest

import fedsyn.federation.server as server_mod
from fedsyn import FederatedGANSynthesizer, GANSynthesizer
from fedsyn.cli import main
from fedsyn.data import generate_ring, parse_idx, ring_centers
from fedsyn.exceptions import FormatError
from fedsyn.federation import ClientUpdate, Shard, aggregate
from fedsyn.federation.wire import deserialize_params, load_checkpoint, save_checkpoint, serialize_params
from fedsyn.experiment import read_csv
from fedsyn.metrics import GaussianMoments, frechet_distance, matrix_sqrt_psd, mode_coverage
from fedsyn.nn import Arch, Dense, Dropout, LeakyRelu, Sigmoid, backward, forward, init_params
from fedsyn.params import ParamSet
from fedsyn.privacy import LaplaceSpec, sample_laplace

RING = dict(n=3000, modes=10, radius=1.0, sigma=0.05)
THRESHOLD = 4 * RING["sigma"]
GROUPS = [(0, 1, 2), (3, 4, 5, 6), (7, 8, 9)]


@pytest.fixture
def verdict(capsys):
    def report(number, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {number} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return report


# -- 1. gradient oracle -------------------------------------------------------

def random_net(rng):
    n_dense = int(rng.integers(1, 4))
    dims = rng.integers(1, 7, size=n_dense + 1)
    layers = []
    for k in range(n_dense):
        layers.append(Dense(int(dims[k]), int(dims[k + 1])))
        if k < n_dense - 1:
            layers.append(LeakyRelu(0.2))
            if rng.random() < 0.3:
                layers.append(Dropout(0.3))
    if rng.random() < 0.5:
        layers.append(Sigmoid())
    arch = Arch(layers)
    params = init_params(arch, rng)
    # random biases too: a zero bias behind a fully dropped row sits exactly on the LeakyRelu kink
    return arch, params.with_vector(rng.normal(scale=0.7, size=params.size))


def central_differences(f, x, h=1e-5):
    grad = np.zeros_like(x)
    for i in range(x.size):
        up, dn = x.copy(), x.copy()
        up.flat[i] += h
        dn.flat[i] -= h
        grad.flat[i] = (f(up) - f(dn)) / (2 * h)
    return grad


def rel_err(a, b, floor=1e-8):
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor))


def test_gradient_oracle(verdict):
    start = time.perf_counter()
    worst = 0.0
    rng = np.random.default_rng(20)
    for case in range(50):
        arch, params = random_net(rng)
        x = rng.normal(size=(int(rng.integers(1, 9)), arch.in_dim))
        mode = "train" if arch.has_dropout else "eval"

        def run(p, xx):
            # a fresh rng with a fixed seed replays the same dropout masks
            return forward(arch, p, xx, mode=mode, rng=np.random.default_rng(case))

        out, tape = run(params, x)
        upstream = rng.normal(size=out.shape)
        grads, grad_x = backward(arch, tape, upstream, return_input_grad=True)
        num_p = central_differences(lambda v: np.sum(upstream * run(params.with_vector(v), x)[0]),
                                    params.to_vector())
        num_x = central_differences(lambda xx: np.sum(upstream * run(params, xx)[0]), x)
        worst = max(worst, rel_err(grads.to_vector(), num_p), rel_err(grad_x, num_x))
    elapsed = time.perf_counter() - start
    verdict(1, worst < 1e-4 and elapsed < 10,
            f"50 random nets, worst relative error {worst:.2e} (< 1e-4), {elapsed:.2f} s (< 10 s)")


# -- 2. Laplace statistics ----------------------------------------------------

def test_laplace_statistics(verdict):
    start = time.perf_counter()
    rows, ok = [], True
    for k, lam in enumerate((1.0, 0.1, 0.001)):
        mu = 0.5 - k
        x = sample_laplace(np.random.default_rng(k), LaplaceSpec(mu, lam), 10**6)
        med, mad, var = np.median(x), np.mean(np.abs(x - mu)), np.var(x)
        ok &= abs(med - mu) <= 0.01 * lam
        ok &= abs(mad / lam - 1) <= 0.02
        ok &= abs(var / (2 * lam**2) - 1) <= 0.05
        rows.append(f"lam={lam:g}: median-mu={med - mu:+.1e}, mad/lam={mad / lam:.4f}, var/2lam^2={var / (2 * lam**2):.4f}")
    elapsed = time.perf_counter() - start
    verdict(2, ok and elapsed < 5, "; ".join(rows) + f"; {elapsed:.2f} s (< 5 s)")


# -- 3. aggregation oracle ----------------------------------------------------

def scripted_mean(vectors, weights):
    total = 0.0
    for w in weights:
        total += w
    out = [0.0] * len(vectors[0])
    for vec, w in zip(vectors, weights):
        for j in range(len(vec)):
            out[j] += float(vec[j]) * (w / total)
    return np.array(out)


def test_aggregation_oracle(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    cases = [([np.full(7, 1.0), np.full(7, 2.0), np.full(7, 3.0)], [0.3, 0.4, 0.3])]
    for _ in range(20):
        k = int(rng.integers(2, 6))
        size = int(rng.integers(1, 30))
        cases.append((list(rng.normal(size=(k, size)) * 10), list(rng.uniform(0.05, 5.0, size=k))))
    worst = 0.0
    for vectors, weights in cases:
        ups = [ClientUpdate(i, 1, ParamSet([("g.w", v)]), w) for i, (v, w) in enumerate(zip(vectors, weights))]
        got = aggregate(ups, None)["g.w"]
        want = scripted_mean(vectors, weights)
        worst = max(worst, rel_err(got, want, floor=1e-300))
    three_way = aggregate([ClientUpdate(i, 1, ParamSet([("g.w", v)]), w)
                       for i, (v, w) in enumerate(zip(*cases[0]))], None)["g.w"]
    elapsed = time.perf_counter() - start
    verdict(3, worst <= 1e-12 and np.allclose(three_way, 2.0, rtol=1e-12) and elapsed < 1,
            f"21 cases incl. weights 0.3/0.4/0.3 -> {float(three_way[0])!r}, worst relative error {worst:.1e}, {elapsed:.3f} s")


# -- 4. Frechet correctness ---------------------------------------------------

def test_frechet_correctness(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    s0 = rng.normal(size=(6, 6))
    m = GaussianMoments(rng.normal(size=6), s0 @ s0.T + np.eye(6))
    same = frechet_distance(m, m)
    closed = frechet_distance(GaussianMoments(np.zeros(1), np.eye(1)), GaussianMoments(np.full(1, 3.0), np.full((1, 1), 4.0)))
    worst = 0.0
    for _ in range(20):
        d = int(rng.integers(1, 17))
        a = rng.normal(size=(d, int(rng.integers(1, d + 3))))
        psd = a @ a.T
        root = matrix_sqrt_psd(psd)
        worst = max(worst, np.linalg.norm(root @ root - psd) / np.linalg.norm(psd))
    elapsed = time.perf_counter() - start
    ok = same <= 1e-8 and abs(closed - 10.0) <= 1e-10 and worst < 1e-8 and elapsed < 5
    verdict(4, ok, f"identical {same:.1e}, 1-D closed form {closed!r} (10), "
                   f"worst sqrt residual {worst:.1e} over 20 PSD matrices, {elapsed:.2f} s")


# -- 5. central baseline quality ----------------------------------------------

def test_central_baseline_covers_ring(verdict):
    start = time.perf_counter()
    ds = generate_ring(np.random.default_rng(0), **RING)
    est = GANSynthesizer(epochs=50, random_state=0).fit(ds.samples)
    covered, _ = mode_coverage(est.sample(2000, random_state=1), ds.centers, THRESHOLD, 0.01)
    elapsed = time.perf_counter() - start
    verdict(5, len(covered) >= 9 and elapsed < 300,
            f"central GAN covers {len(covered)}/10 modes (>= 9), {elapsed:.1f} s")


# -- 6. federated non-IID claim -----------------------------------------------

def test_federated_exceeds_every_client(verdict):
    start = time.perf_counter()
    ds = generate_ring(np.random.default_rng(0), **RING)
    centers = ring_centers(10, 1.0)
    fed = FederatedGANSynthesizer(label_groups=GROUPS, rounds=300, local_epochs=5, client_lambda=1e-4,
                                  random_state=0).fit(ds.samples, ds.labels)
    global_cov, _ = mode_coverage(fed.sample(2000, random_state=1), centers, THRESHOLD, 0.01)

    shards = fed.make_shards(ds.samples, ds.labels)
    solo = []
    for k, shard in enumerate(shards):
        # same optimiser and total epoch budget as one federated client, no peers
        est = GANSynthesizer(epochs=fed.rounds * fed.local_epochs, batch_size=fed.batch_size,
                             learning_rate=fed.learning_rate, random_state=k).fit(shard.samples)
        cov, _ = mode_coverage(est.sample(2000, random_state=1), centers, THRESHOLD, 0.01)
        solo.append(cov)
    elapsed = time.perf_counter() - start
    exceeds = all(len(global_cov) > len(c) for c in solo)
    contained = all(c <= set(g) for c, g in zip(solo, GROUPS))
    detail = (f"global covers {sorted(global_cov)}; clients cover "
              f"{[sorted(c) for c in solo]} (shards {GROUPS}); {elapsed:.0f} s (< 900 s)")
    verdict(6, exceeds and contained and elapsed < 900, detail)


# -- 7. lambda-sweep trend ----------------------------------------------------

def test_lambda_sweep_trend(verdict, tmp_path):
    start = time.perf_counter()
    cfg = tmp_path / "sweep.json"
    cfg.write_text('{"seed": 0, "out": "out", "sweep": {"lambdas": [1, 0.1, 0.01, 0.0001]}}')
    assert main(["train-central", "--config", str(cfg)]) == 0
    assert main(["sweep-lambda", "--config", str(cfg)]) == 0
    _, _, rows = read_csv(tmp_path / "out" / "sweep.csv")
    score = {float(r[0]): float(r[1]) for r in rows}
    elapsed = time.perf_counter() - start
    ratio = score[1.0] / score[1e-4]
    order = [1e-4, 1e-2, 1e-1, 1.0]
    monotone = all(score[b] >= 0.9 * score[a] for a, b in zip(order, order[1:]))
    table = ", ".join(f"{lam:g}: {score[lam]:.4g}" for lam in order)
    verdict(7, ratio >= 3 and monotone and elapsed < 1800,
            f"scores {{{table}}}; ratio {ratio:.3g} (>= 3); non-decreasing within 10%: {monotone}; {elapsed:.0f} s")


# -- 8. privacy boundary ------------------------------------------------------

FORBIDDEN = {"fedsyn.data", "fedsyn.federation.partition", "fedsyn.federation.protocol",
             "fedsyn.gan", "fedsyn.estimators", "fedsyn.experiment"}


def is_module(name):
    try:
        return importlib.util.find_spec(name) is not None
    except ModuleNotFoundError:
        return False


def fedsyn_imports(module):
    """Absolute names of the fedsyn modules that ``module`` imports."""
    package = module.__name__.rsplit(".", 1)[0]
    found = set()
    for node in ast.walk(ast.parse(inspect.getsource(module))):
        if isinstance(node, ast.ImportFrom):
            base = importlib.util.resolve_name("." * node.level + (node.module or ""), package)
            for alias in node.names:
                sub = f"{base}.{alias.name}"
                found.add(sub if is_module(sub) else base)
        elif isinstance(node, ast.Import):
            found.update(a.name for a in node.names)
    return {name for name in found if name.split(".")[0] == "fedsyn"}


def test_privacy_boundary(verdict):
    reachable, todo = set(), [server_mod.__name__]
    while todo:
        name = todo.pop()
        if name in reachable:
            continue
        reachable.add(name)
        todo.extend(fedsyn_imports(importlib.import_module(name)))
    leaked = reachable & FORBIDDEN
    holds_shard = any(v is Shard for mod in reachable for v in vars(importlib.import_module(mod)).values())
    sig = inspect.signature(server_mod.aggregate)
    typed = "ClientUpdate" in str(sig.parameters["updates"].annotation)
    try:
        aggregate([Shard(np.zeros((2, 2)), np.zeros(2, dtype=int), 1.0)], None)
        refuses = False
    except TypeError:
        refuses = True
    fields = set(ClientUpdate.__dataclass_fields__)
    ok = not leaked and not holds_shard and typed and refuses and fields == {"client_id", "round", "params", "weight"}
    verdict(8, ok, f"server reaches {sorted(reachable)}; forbidden reached: {sorted(leaked) or 'none'}; "
                   f"Shard reachable: {holds_shard}; aggregate rejects Shard: {refuses}; update fields {sorted(fields)}")


# -- 9. formats ---------------------------------------------------------------

def idx_fixture():
    images = struct.pack(">IIII", 0x803, 2, 2, 2) + bytes([0, 255, 128, 64, 1, 2, 3, 4])
    labels = struct.pack(">II", 0x801, 2) + bytes([7, 1])
    return images, labels


def mutate_header(payload, rng, header_len):
    buf = bytearray(payload)
    for _ in range(int(rng.integers(1, 4))):
        buf[int(rng.integers(0, min(header_len, len(buf))))] = int(rng.integers(0, 256))
    return bytes(buf)


def test_formats(verdict, tmp_path):
    rng = np.random.default_rng(9)
    params = ParamSet([("g.w0", rng.normal(size=(8, 16))), ("g.b0", np.zeros(16)), ("d.w1", rng.normal(size=(16, 1)))])
    save_checkpoint(tmp_path / "a.fsyn", params)
    save_checkpoint(tmp_path / "b.fsyn", load_checkpoint(tmp_path / "a.fsyn"))
    roundtrip = (tmp_path / "a.fsyn").read_bytes() == (tmp_path / "b.fsyn").read_bytes()

    images, labels = idx_fixture()
    ds = parse_idx(images, labels)
    hand = np.array([[0, 1, 128 / 255, 64 / 255], [1 / 255, 2 / 255, 3 / 255, 4 / 255]])
    idx_ok = np.allclose(ds.samples, hand, rtol=0, atol=1e-15) and ds.labels.tolist() == [7, 1]

    outcomes = {"format error": 0, "valid parse": 0}
    crashes = []
    payload = serialize_params(params)
    for _ in range(1000):
        for decode, blob in ((deserialize_params, mutate_header(payload, rng, 40)),
                             (lambda b: parse_idx(b, labels), mutate_header(images, rng, 16)),
                             (lambda b: parse_idx(images, b), mutate_header(labels, rng, 8))):
            try:
                decode(blob)
                outcomes["valid parse"] += 1
            except FormatError:
                outcomes["format error"] += 1
            except Exception as exc:  # anything else is a crash
                crashes.append(repr(exc))
    ok = roundtrip and idx_ok and not crashes
    verdict(9, ok, f"checkpoint round-trip byte-identical: {roundtrip}; IDX fixture matches hand values: {idx_ok}; "
                   f"3x1000 header mutations -> {outcomes}, crashes: {crashes[:3] or 'none'}")


# -- 10. determinism ----------------------------------------------------------

def snapshot(directory):
    return {p.relative_to(directory).as_posix(): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


def test_every_command_is_deterministic(verdict, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"seed": 11, "out": "out", "dataset": {"n": 600}, "gan": {"epochs": 20},'
                   ' "federation": {"rounds": 4, "local_epochs": 3, "server_lambda": 1e-5, "n_jobs": 3},'
                   ' "sweep": {"lambdas": [0.1, 0.0001], "n_samples": 500}}')
    commands = [["train-central"], ["train-federated"], ["sweep-lambda"], ["gen-samples", "--n", "100"]]
    runs = []
    for _ in range(2):
        for cmd in commands:
            assert main(cmd + ["--config", str(cfg)]) == 0
        runs.append(snapshot(tmp_path / "out"))
    differing = sorted(k for k in runs[0] if runs[0][k] != runs[1].get(k))
    ok = not differing and runs[0].keys() == runs[1].keys() and len(runs[0]) >= 9
    verdict(10, ok, f"re-ran 4 commands; {len(runs[0])} output files, differing: {differing or 'none'}")

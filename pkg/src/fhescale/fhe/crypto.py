"""Mock homomorphic layer: additive masking over Z_2^64 with noise accounting.

Not cryptography. Payloads are plaintext integers masked by a
key/nonce-derived stream, which preserves the *semantics* of the real
pipeline -- ciphertexts are opaque to the server, evaluation needs only
public key material, bootstrapping refreshes noise -- at desk scale.

How it holds together:

* A ciphertext carries payload = (m + mask) mod 2^64 where
  mask = PRF(secret seed, nonce). Affine server-side ops combine payloads
  and track the mask lineage as (nonce, coefficient) pairs, so decryption
  stays self-contained: the client recomputes the combined mask from the
  secret seed alone.
* The evaluation key carries a sealed refresh closure built at keygen
  time. It stands in for the bootstrapping key: internally it strips the
  lineage mask, optionally applies an integer lookup table (the lowered
  activation), and re-masks under a fresh nonce. It never returns
  plaintext to the caller, and the EvalKey's public fields hold no
  mask-generation state.
* noise_budget counts homomorphic work since the last refresh. Crossing
  the configured maximum without bootstrapping is a hard error; lookup
  tables are only realisable through a refresh, so they overflow any
  budget when bootstrapping is disabled.
"""

from __future__ import annotations

import hashlib
import threading
import warnings
from dataclasses import dataclass, field

import numpy as np

from .circuit import CircuitBundle, ClientParams, _activation_table, _quantize_input
from .model import argmax_class

MODULUS_BITS = 64
_MOD_MASK = (1 << MODULUS_BITS) - 1
DEFAULT_MAX_NOISE_BUDGET = 64
DEFAULT_BOOTSTRAP_THRESHOLD = 32

_CLIENT_DOMAIN = b"c"
_SERVER_DOMAIN = b"s"


class KeyMismatchError(ValueError):
    """Ciphertext, key, and circuit identities do not line up."""


class NoiseOverflowError(RuntimeError):
    """Noise budget exhausted before the circuit finished."""


def _prf(seed_bytes: bytes, domain: bytes, nonce: int) -> int:
    digest = hashlib.sha256(
        seed_bytes + domain + nonce.to_bytes(8, "little", signed=False)).digest()
    return int.from_bytes(digest[:8], "little")


def _to_signed(value: int) -> int:
    return value - (1 << MODULUS_BITS) if value >= (1 << (MODULUS_BITS - 1)) else value


@dataclass
class SecretKey:
    """Client-only mask-generation state. Never ships to the server."""
    seed: int
    key_id: str
    _nonce_counter: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False,
                                  compare=False)

    @property
    def _seed_bytes(self) -> bytes:
        return self.seed.to_bytes(16, "little", signed=True)

    def _take_nonces(self, n: int) -> list:
        with self._lock:
            start = self._nonce_counter
            self._nonce_counter += n
        return list(range(start, start + n))


class EvalKey:
    """Server-visible key: identifier, noise parameters, sealed refresh.

    Public attributes expose no mask-generation state; the refresh
    closure is the mock analog of a bootstrapping key.
    """

    def __init__(self, key_id: str, max_noise_budget: int,
                 bootstrap_threshold: int, refresh, refresh_linear):
        self.key_id = key_id
        self.max_noise_budget = max_noise_budget
        self.bootstrap_threshold = bootstrap_threshold
        self._refresh = refresh
        self._refresh_linear = refresh_linear

    def __repr__(self):
        return (f"EvalKey(key_id={self.key_id!r}, "
                f"max_noise_budget={self.max_noise_budget}, "
                f"bootstrap_threshold={self.bootstrap_threshold})")


@dataclass(frozen=True)
class Ciphertext:
    payload: int                 # masked integer in [0, 2^64)
    mask_spec: tuple             # ((domain, nonce), coefficient) pairs
    key_id: str
    noise_budget: int = 0

    @property
    def nonce(self):
        """Slot nonce of a freshly (re-)encrypted ciphertext."""
        if len(self.mask_spec) != 1 or self.mask_spec[0][1] != 1:
            raise ValueError("ciphertext carries a combined mask, not a single slot")
        return self.mask_spec[0][0]


def keygen(seed: int, max_noise_budget: int = DEFAULT_MAX_NOISE_BUDGET,
           bootstrap_threshold: int = DEFAULT_BOOTSTRAP_THRESHOLD):
    """Derive a (SecretKey, EvalKey) pair from a seed. Deterministic."""
    if bootstrap_threshold > max_noise_budget:
        raise ValueError("bootstrap threshold cannot exceed the noise budget")
    seed = int(seed)
    seed_bytes = seed.to_bytes(16, "little", signed=True)
    key_id = "key-" + hashlib.sha256(seed_bytes).hexdigest()[:16]
    server_counter = [0]
    counter_lock = threading.Lock()

    def _remask(values: np.ndarray):
        with counter_lock:
            start = server_counter[0]
            server_counter[0] += len(values)
        nonces = list(range(start, start + len(values)))
        fresh = np.array([_prf(seed_bytes, _SERVER_DOMAIN, n) for n in nonces],
                         dtype=np.uint64)
        payloads = values.astype(np.uint64) + fresh  # wraps mod 2^64
        return [int(p) for p in payloads], [("s", n) for n in nonces]

    def refresh(payloads, nonce_coeff_lists, table=None):
        # Sealed bootstrap: unmask internally, apply the lookup, re-mask
        # under fresh server nonces. Plaintext never escapes this scope.
        values = []
        prf_cache = {}
        for payload, spec in zip(payloads, nonce_coeff_lists):
            mask = 0
            for (domain, nonce), coeff in spec:
                key = (domain, nonce)
                if key not in prf_cache:
                    prf_cache[key] = _prf(seed_bytes, domain.encode(), nonce)
                mask = (mask + coeff * prf_cache[key]) & _MOD_MASK
            values.append(_to_signed((payload - mask) & _MOD_MASK))
        values = np.array(values, dtype=np.int64)
        if table is not None:
            values = np.asarray(table(values), dtype=np.int64)
        return list(zip(*_remask(values)))

    def refresh_linear(payloads, slots, coeffs, table=None):
        # Vectorized variant for the affine layer: every input ciphertext
        # is a fresh single slot and the mask combination is coeffs @ prf.
        prf_vec = np.array([_prf(seed_bytes, domain.encode(), nonce)
                            for domain, nonce in slots], dtype=np.uint64)
        masks = np.asarray(coeffs, dtype=np.int64).astype(np.uint64) @ prf_vec
        values = (np.asarray(payloads, dtype=np.uint64) - masks).astype(np.int64)
        if table is not None:
            values = np.asarray(table(values), dtype=np.int64)
        return list(zip(*_remask(values)))

    secret = SecretKey(seed=seed, key_id=key_id)
    evaluation = EvalKey(key_id=key_id, max_noise_budget=max_noise_budget,
                         bootstrap_threshold=bootstrap_threshold,
                         refresh=refresh, refresh_linear=refresh_linear)
    return secret, evaluation


class ClampWarning(UserWarning):
    pass


def encrypt(client_params: ClientParams, secret: SecretKey,
            features: np.ndarray) -> list:
    """Quantize one feature vector with the client parameters and mask it."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (client_params.n_features,):
        raise ValueError(f"expected {client_params.n_features} features, "
                         f"got shape {features.shape}")
    lo, hi = client_params.input_range
    if np.any(features < lo) or np.any(features > hi):
        warnings.warn("features outside the declared input range were clamped",
                      ClampWarning)
        features = np.clip(features, lo, hi)
    q = _quantize_input(features, client_params)
    nonces = secret._take_nonces(len(q))
    out = []
    for value, nonce in zip(q, nonces):
        mask = _prf(secret._seed_bytes, _CLIENT_DOMAIN, nonce)
        payload = (int(value) + mask) & _MOD_MASK
        out.append(Ciphertext(payload=payload,
                              mask_spec=((("c", nonce), 1),),
                              key_id=secret.key_id, noise_budget=0))
    return out


def evaluate(bundle: CircuitBundle, eval_key: EvalKey, inputs: list,
             bootstrap: bool = True) -> list:
    """Run the compiled circuit over encrypted inputs, ciphertext to ciphertext.

    The affine layer combines payloads with the quantized weights; the
    optional activation is a lookup realised through the sealed refresh.
    Raises NoiseOverflowError when the work exceeds the noise budget and
    bootstrapping is off, KeyMismatchError on any identity mismatch.
    """
    if bundle.eval_key_id != eval_key.key_id:
        raise KeyMismatchError(
            f"bundle expects key {bundle.eval_key_id!r}, got {eval_key.key_id!r}")
    if len(inputs) != bundle.n_features:
        raise ValueError(f"expected {bundle.n_features} ciphertexts, "
                         f"got {len(inputs)}")
    for ct in inputs:
        if ct.key_id != eval_key.key_id:
            raise KeyMismatchError("input ciphertext was produced under a "
                                   "different key")

    qw = bundle.weights.values
    n_classes, n_features = qw.shape
    affine_cost = n_features + 1  # one MAC per feature plus the bias add
    in_noise = max(ct.noise_budget for ct in inputs)
    out_noise = in_noise + affine_cost
    if out_noise > eval_key.max_noise_budget and not bootstrap:
        raise NoiseOverflowError(
            f"affine layer needs noise budget {out_noise}, "
            f"maximum is {eval_key.max_noise_budget} and bootstrapping is off")

    payloads = np.array([ct.payload for ct in inputs], dtype=np.uint64)
    qw_u = qw.astype(np.uint64)
    qb_u = bundle.bias.values.astype(np.uint64)
    out_payloads = qw_u @ payloads + qb_u

    needs_table = bundle.activation is not None
    if needs_table and not bootstrap:
        raise NoiseOverflowError(
            "activation lookup is only realisable through bootstrapping; "
            "its noise cost exceeds any budget")
    do_refresh = bootstrap and (needs_table
                                or out_noise >= eval_key.bootstrap_threshold)
    table = _activation_table(bundle) if needs_table else None

    fresh_inputs = all(len(ct.mask_spec) == 1 and ct.mask_spec[0][1] == 1
                       for ct in inputs)
    if do_refresh and fresh_inputs:
        slots = [ct.mask_spec[0][0] for ct in inputs]
        refreshed = eval_key._refresh_linear(out_payloads, slots, qw, table=table)
        return [Ciphertext(payload=p, mask_spec=((slot, 1),),
                           key_id=eval_key.key_id, noise_budget=0)
                for p, slot in refreshed]

    # combined mask lineage per output class: coefficient = weight
    specs = []
    for c in range(n_classes):
        spec = []
        for j, ct in enumerate(inputs):
            w = int(qw[c, j])
            if w == 0:
                continue
            for slot, coeff in ct.mask_spec:
                spec.append((slot, coeff * w))
        specs.append(tuple(spec))

    if do_refresh:
        refreshed = eval_key._refresh([int(p) for p in out_payloads], specs,
                                      table=table)
        return [Ciphertext(payload=p, mask_spec=((slot, 1),),
                           key_id=eval_key.key_id, noise_budget=0)
                for p, slot in refreshed]

    return [Ciphertext(payload=int(p), mask_spec=spec,
                       key_id=eval_key.key_id, noise_budget=out_noise)
            for p, spec in zip(out_payloads, specs)]


def decrypt(secret: SecretKey, client_params: ClientParams, scores: list):
    """Unmask, dequantize with the output scale, return (floats, best class)."""
    ints = decrypt_integers(secret, scores)
    floats = np.array(ints, dtype=np.float64) * client_params.output_scale
    return floats, argmax_class(floats)


def decrypt_integers(secret: SecretKey, cts: list) -> list:
    """Unmask ciphertexts back to signed integers (pre-rescale)."""
    out = []
    for ct in cts:
        if ct.key_id != secret.key_id:
            raise KeyMismatchError(
                f"ciphertext under key {ct.key_id!r} cannot be opened with "
                f"{secret.key_id!r}")
        mask = 0
        for (domain, nonce), coeff in ct.mask_spec:
            mask = (mask + coeff * _prf(secret._seed_bytes, domain.encode(),
                                        nonce)) & _MOD_MASK
        out.append(_to_signed((ct.payload - mask) & _MOD_MASK))
    return out

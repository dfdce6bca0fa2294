import numpy as np
import pytest

from fhescale.fhe.circuit import compile_circuit, evaluate_plaintext, _quantize_input
from fhescale.fhe.crypto import (ClampWarning, KeyMismatchError,
                                 NoiseOverflowError, decrypt, decrypt_integers,
                                 encrypt, evaluate, keygen)
from fhescale.fhe.model import FloatModel

TOY = FloatModel(weights=np.array([[1.0, -0.5], [0.25, 0.75]]),
                 bias=np.array([0.1, -0.2]), n_classes=2, n_features=2)


def make_bundle(eval_key, activation=False, model=TOY, input_range=(-2.0, 2.0)):
    return compile_circuit(model, bits=8, input_range=input_range,
                           activation=activation, eval_key_id=eval_key.key_id)


def test_keygen_deterministic_per_seed():
    sk1, ek1 = keygen(42)
    sk2, ek2 = keygen(42)
    assert sk1.seed == sk2.seed and sk1.key_id == sk2.key_id
    assert ek1.key_id == ek2.key_id
    sk3, _ = keygen(43)
    assert sk3.key_id != sk1.key_id


def test_eval_key_exposes_no_mask_state():
    sk, ek = keygen(9)
    public = {k: v for k, v in vars(ek).items() if not k.startswith("_")}
    assert set(public) == {"key_id", "max_noise_budget", "bootstrap_threshold"}
    assert sk.seed not in public.values()


def test_encrypt_roundtrip_equals_quantization():
    sk, ek = keygen(1)
    bundle = make_bundle(ek)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.uniform(-2, 2, size=2)
        cts = encrypt(bundle.client_params, sk, x)
        got = decrypt_integers(sk, cts)
        assert got == _quantize_input(x, bundle.client_params).tolist()


def test_fresh_nonces_differ_and_payloads_differ():
    sk, ek = keygen(1)
    bundle = make_bundle(ek)
    x = np.array([0.5, -0.5])
    a = encrypt(bundle.client_params, sk, x)
    b = encrypt(bundle.client_params, sk, x)
    assert all(ca.payload != cb.payload for ca, cb in zip(a, b))


def test_distinct_seeds_distinct_payloads():
    x = np.array([0.5, -0.5])
    sk1, ek1 = keygen(100)
    sk2, ek2 = keygen(200)
    c1 = encrypt(make_bundle(ek1).client_params, sk1, x)
    c2 = encrypt(make_bundle(ek2).client_params, sk2, x)
    assert all(a.payload != b.payload for a, b in zip(c1, c2))


def test_out_of_range_features_clamped_with_warning():
    sk, ek = keygen(1)
    bundle = make_bundle(ek)
    with pytest.warns(ClampWarning):
        cts = encrypt(bundle.client_params, sk, np.array([5.0, 0.0]))
    clamped = decrypt_integers(sk, cts)
    assert clamped == _quantize_input(np.array([2.0, 0.0]),
                                      bundle.client_params).tolist()


def test_dimension_mismatch_rejected():
    sk, ek = keygen(1)
    bundle = make_bundle(ek)
    with pytest.raises(ValueError):
        encrypt(bundle.client_params, sk, np.zeros(3))


@pytest.mark.parametrize("activation", [False, True])
def test_homomorphic_equivalence_fuzz(activation):
    sk, ek = keygen(77)
    bundle = make_bundle(ek, activation=activation)
    rng = np.random.default_rng(3)
    for _ in range(300):
        x = rng.uniform(-2, 2, size=2)
        cts = encrypt(bundle.client_params, sk, x)
        out = evaluate(bundle, ek, cts)
        assert decrypt_integers(sk, out) == evaluate_plaintext(bundle, x).tolist()


def test_zero_vector_decrypts_to_biases():
    sk, ek = keygen(5)
    bundle = make_bundle(ek)
    cts = encrypt(bundle.client_params, sk, np.zeros(2))
    out = evaluate(bundle, ek, cts)
    assert decrypt_integers(sk, out) == bundle.bias.values.tolist()


def test_decrypt_returns_finite_floats_and_argmax():
    sk, ek = keygen(5)
    bundle = make_bundle(ek)
    cts = encrypt(bundle.client_params, sk, np.array([1.0, -1.0]))
    floats, best = decrypt(sk, bundle.client_params, evaluate(bundle, ek, cts))
    assert np.all(np.isfinite(floats))
    assert best == int(np.argmax(floats))


def test_wrong_key_is_loud():
    sk1, ek1 = keygen(1)
    sk2, ek2 = keygen(2)
    bundle = make_bundle(ek1)
    cts = encrypt(bundle.client_params, sk1, np.zeros(2))
    with pytest.raises(KeyMismatchError):
        decrypt_integers(sk2, cts)
    with pytest.raises(KeyMismatchError):
        evaluate(bundle, ek2, cts)
    bundle2 = make_bundle(ek2)
    with pytest.raises(KeyMismatchError):
        evaluate(bundle2, ek2, cts)


def test_noise_accounting_and_overflow():
    sk, ek = keygen(1, max_noise_budget=64, bootstrap_threshold=32)
    bundle = make_bundle(ek)
    cts = encrypt(bundle.client_params, sk, np.zeros(2))
    assert all(ct.noise_budget == 0 for ct in cts)
    # 2 features + bias = cost 3, below the threshold: no refresh
    out = evaluate(bundle, ek, cts, bootstrap=False)
    assert all(ct.noise_budget == 3 for ct in out)

    wide = FloatModel(weights=np.ones((2, 80)), bias=np.zeros(2),
                      n_classes=2, n_features=80)
    wide_bundle = compile_circuit(wide, bits=8, input_range=(-2.0, 2.0),
                                  eval_key_id=ek.key_id)
    wide_cts = encrypt(wide_bundle.client_params, sk, np.zeros(80))
    with pytest.raises(NoiseOverflowError):
        evaluate(wide_bundle, ek, wide_cts, bootstrap=False)
    refreshed = evaluate(wide_bundle, ek, wide_cts, bootstrap=True)
    assert all(ct.noise_budget == 0 for ct in refreshed)


def test_activation_without_bootstrap_overflows():
    sk, ek = keygen(1)
    bundle = make_bundle(ek, activation=True)
    cts = encrypt(bundle.client_params, sk, np.zeros(2))
    with pytest.raises(NoiseOverflowError):
        evaluate(bundle, ek, cts, bootstrap=False)


def test_server_interface_exposes_no_plaintext():
    # the only public server-side entry point is evaluate(); it returns
    # ciphertexts, and the eval key has no decrypt-like surface
    sk, ek = keygen(1)
    public = [name for name in dir(ek) if not name.startswith("_")]
    assert "decrypt" not in public and "unmask" not in public
    bundle = make_bundle(ek)
    cts = encrypt(bundle.client_params, sk, np.array([1.0, 1.0]))
    out = evaluate(bundle, ek, cts)
    assert all(hasattr(ct, "payload") and hasattr(ct, "noise_budget")
               for ct in out)

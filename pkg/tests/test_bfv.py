"""BFV subset: encryption, homomorphic ops, rotation, re-encryption, noise."""

import math

import numpy as np
import pytest

from privcnn import bfv
from privcnn.errors import MissingKeyError, ParameterError
from privcnn.params import KEY_MODE_ALL, KEY_MODE_LOG, PRESETS
from privcnn.ring import center_lift, get_codec, max_abs, poly_sub

MICRO = PRESETS["micro"]
TOY = PRESETS["toy"]


@pytest.fixture(scope="module")
def toy_keys():
    rng = np.random.default_rng(100)
    sk_c = bfv.keygen(TOY, bfv.OWNER_CLIENT, rng)
    sk_p = bfv.keygen(TOY, bfv.OWNER_PROXY, rng)
    return sk_c, sk_p, rng


def rand_slots(params, rng):
    return rng.integers(0, params.t, params.n, dtype=np.uint64)


class TestEncryptDecrypt:
    def test_roundtrip_micro(self):
        rng = np.random.default_rng(0)
        sk = bfv.keygen(MICRO, bfv.OWNER_CLIENT, rng)
        for _ in range(200):
            v = rand_slots(MICRO, rng)
            ct = bfv.encrypt_slots(sk, v, rng)
            assert np.array_equal(bfv.decrypt_slots(sk, ct), v)

    def test_roundtrip_toy_bulk(self, toy_keys):
        sk, _, rng = toy_keys
        for _ in range(25):
            v = rand_slots(TOY, rng)
            ct = bfv.encrypt_slots(sk, v, rng)
            assert np.array_equal(bfv.decrypt_slots(sk, ct), v)

    def test_wrong_key_garbles(self, toy_keys):
        sk_c, sk_p, rng = toy_keys
        for _ in range(5):
            v = rand_slots(TOY, rng)
            ct = bfv.encrypt_slots(sk_c, v, rng)
            assert not np.array_equal(get_codec(TOY).decode(bfv.decrypt(sk_p, ct)), v)

    def test_fresh_noise_within_heuristics(self, toy_keys):
        sk, _, rng = toy_keys
        codec = get_codec(TOY)
        upper_subgauss = 6 * math.sqrt(2 * TOY.n) * TOY.sigma
        upper_envelope = 4 * 12 * TOY.n * TOY.sigma
        for _ in range(10):
            pt = codec.encode(rand_slots(TOY, rng))
            ct = bfv.encrypt(sk, pt, rng)
            noise = bfv.noise_of(ct, sk, pt)
            assert noise <= upper_subgauss
            assert noise <= upper_envelope

    def test_fresh_budget_positive_toy(self, toy_keys):
        sk, _, rng = toy_keys
        pt = get_codec(TOY).encode(rand_slots(TOY, rng))
        ct = bfv.encrypt(sk, pt, rng)
        assert bfv.noise_budget(ct, sk, pt) > 20


class TestAdd:
    def test_add_zero_is_identity(self, toy_keys):
        sk, _, rng = toy_keys
        v = rand_slots(TOY, rng)
        ct = bfv.encrypt_slots(sk, v, rng)
        zero = bfv.encrypt_slots(sk, np.zeros(TOY.n, dtype=np.uint64), rng)
        assert np.array_equal(bfv.decrypt_slots(sk, bfv.he_add(ct, zero)), v)

    def test_slotwise_sum(self, toy_keys):
        sk, _, rng = toy_keys
        for _ in range(10):
            u, v = rand_slots(TOY, rng), rand_slots(TOY, rng)
            got = bfv.decrypt_slots(
                sk, bfv.he_add(bfv.encrypt_slots(sk, u, rng), bfv.encrypt_slots(sk, v, rng))
            )
            assert np.array_equal(got, (u + v) % TOY.t)

    def test_noise_additivity(self, toy_keys):
        sk, _, rng = toy_keys
        codec = get_codec(TOY)
        u, v = rand_slots(TOY, rng), rand_slots(TOY, rng)
        pu, pv = codec.encode(u), codec.encode(v)
        cu, cv = bfv.encrypt(sk, pu, rng), bfv.encrypt(sk, pv, rng)
        psum = codec.encode((u + v) % TOY.t)
        assert bfv.noise_of(bfv.he_add(cu, cv), sk, psum) <= (
            bfv.noise_of(cu, sk, pu) + bfv.noise_of(cv, sk, pv) + 1
        )

    def test_owner_mismatch_rejected(self, toy_keys):
        sk_c, sk_p, rng = toy_keys
        a = bfv.encrypt_slots(sk_c, rand_slots(TOY, rng), rng)
        b = bfv.encrypt_slots(sk_p, rand_slots(TOY, rng), rng)
        with pytest.raises(ParameterError):
            bfv.he_add(a, b)


class TestMulPlain:
    def test_times_ones_unchanged(self, toy_keys):
        sk, _, rng = toy_keys
        codec = get_codec(TOY)
        v = rand_slots(TOY, rng)
        ct = bfv.encrypt_slots(sk, v, rng)
        ones = codec.encode(np.ones(TOY.n, dtype=np.uint64))
        assert np.array_equal(bfv.decrypt_slots(sk, bfv.he_mul_plain(ct, ones, TOY)), v)

    def test_times_zeros(self, toy_keys):
        sk, _, rng = toy_keys
        codec = get_codec(TOY)
        ct = bfv.encrypt_slots(sk, rand_slots(TOY, rng), rng)
        zeros = codec.encode(np.zeros(TOY.n, dtype=np.uint64))
        assert np.all(bfv.decrypt_slots(sk, bfv.he_mul_plain(ct, zeros, TOY)) == 0)

    def test_slotwise_product(self, toy_keys):
        sk, _, rng = toy_keys
        codec = get_codec(TOY)
        for _ in range(10):
            v, w = rand_slots(TOY, rng), rand_slots(TOY, rng)
            ct = bfv.he_mul_plain(bfv.encrypt_slots(sk, v, rng), codec.encode(w), TOY)
            assert np.array_equal(bfv.decrypt_slots(sk, ct), v * w % np.uint64(TOY.t))

    def test_add_plain_and_sub_plain(self, toy_keys):
        sk, _, rng = toy_keys
        codec = get_codec(TOY)
        v, w = rand_slots(TOY, rng), rand_slots(TOY, rng)
        ct = bfv.encrypt_slots(sk, v, rng)
        assert np.array_equal(
            bfv.decrypt_slots(sk, bfv.he_add_plain(ct, codec.encode(w), TOY)),
            (v + w) % TOY.t,
        )
        assert np.array_equal(
            bfv.decrypt_slots(sk, bfv.he_sub_plain(ct, codec.encode(w), TOY)),
            (v + TOY.t - w) % TOY.t,
        )


@pytest.fixture(scope="module")
def rotation_setup():
    rng = np.random.default_rng(200)
    sk = bfv.keygen(TOY, bfv.OWNER_CLIENT, rng)
    w = 1 << 20
    all_keys = bfv.generate_keyset(sk, KEY_MODE_ALL, w, rng, steps=[1, 2, 3, 5, 8, 1021, 1023])
    log_keys = bfv.generate_keyset(sk, KEY_MODE_LOG, w, rng)
    return sk, all_keys, log_keys, rng


def row_rotate(v, k, n):
    half = n // 2
    return np.concatenate([np.roll(v[:half], -k), np.roll(v[half:], -k)])


class TestRotate:
    def test_rotate_zero_is_identity(self, rotation_setup):
        sk, all_keys, _, rng = rotation_setup
        v = rand_slots(TOY, rng)
        ct = bfv.encrypt_slots(sk, v, rng)
        assert bfv.rotate(ct, 0, all_keys, TOY) is ct

    def test_rotate_matches_plain_rotation(self, rotation_setup):
        sk, all_keys, _, rng = rotation_setup
        v = np.arange(TOY.n, dtype=np.uint64) % TOY.t
        ct = bfv.encrypt_slots(sk, v, rng)
        for k in (1, 3, 8):
            got = bfv.decrypt_slots(sk, bfv.rotate(ct, k, all_keys, TOY))
            assert np.array_equal(got, row_rotate(v, k, TOY.n))

    def test_rotate_inverse_composition(self, rotation_setup):
        sk, all_keys, _, rng = rotation_setup
        v = rand_slots(TOY, rng)
        ct = bfv.encrypt_slots(sk, v, rng)
        back = bfv.rotate(bfv.rotate(ct, 3, all_keys, TOY), -3, all_keys, TOY)
        assert np.array_equal(bfv.decrypt_slots(sk, back), v)

    def test_negative_steps(self, rotation_setup):
        sk, all_keys, _, rng = rotation_setup
        v = rand_slots(TOY, rng)
        ct = bfv.encrypt_slots(sk, v, rng)
        got = bfv.decrypt_slots(sk, bfv.rotate(ct, -3, all_keys, TOY))
        assert np.array_equal(got, row_rotate(v, TOY.n // 2 - 3, TOY.n))

    def test_log_keys_compose(self, rotation_setup):
        sk, _, log_keys, rng = rotation_setup
        v = np.arange(TOY.n, dtype=np.uint64) % TOY.t
        ct = bfv.encrypt_slots(sk, v, rng)
        for k in (1, 5, 11):  # 5 and 11 need multiple power-of-two hops
            got = bfv.decrypt_slots(sk, bfv.rotate(ct, k, log_keys, TOY))
            assert np.array_equal(got, row_rotate(v, k, TOY.n))

    def test_missing_key_names_element(self, rotation_setup):
        sk, all_keys, _, rng = rotation_setup
        ct = bfv.encrypt_slots(sk, rand_slots(TOY, rng), rng)
        from privcnn.ring import rotation_galois_elt

        with pytest.raises(MissingKeyError) as err:
            bfv.rotate(ct, 701, all_keys, TOY)
        assert err.value.galois_elt == rotation_galois_elt(701, TOY.n)

    def test_row_swap(self, rotation_setup):
        sk, all_keys, _, rng = rotation_setup
        v = rand_slots(TOY, rng)
        ct = bfv.encrypt_slots(sk, v, rng)
        got = bfv.decrypt_slots(sk, bfv.swap_rows(ct, all_keys, TOY))
        half = TOY.n // 2
        assert np.array_equal(got, np.concatenate([v[half:], v[:half]]))


class TestReencrypt:
    def test_degenerate_base_single_part(self, toy_keys):
        sk_c, sk_p, rng = toy_keys
        rk = bfv.reenc_keygen(sk_c, sk_p, TOY.q, rng)
        assert rk.levels == 1

    def test_key_relation(self, toy_keys):
        sk_c, sk_p, rng = toy_keys
        w = 1 << 16
        rk = bfv.reenc_keygen(sk_c, sk_p, w, rng)
        bound = int(np.ceil(6 * TOY.sigma))
        scale = 1
        for part in rk.parts:
            # pk0 + a*s_p - w^i*s_c should reduce to the sampled error e_i
            body = bfv.poly_mul_by_secret(part.pk1, sk_p)
            from privcnn.ring import Polynomial, poly_add

            term = Polynomial(
                (sk_c.s.coeffs.astype(object) * scale % TOY.q).astype(np.uint64), TOY.q
            )
            residue = poly_sub(poly_add(part.pk0, body), term)
            assert max_abs(residue) <= bound
            scale *= w

    def test_roundtrip_under_proxy_key(self, toy_keys):
        sk_c, sk_p, rng = toy_keys
        rk = bfv.reenc_keygen(sk_c, sk_p, 1 << 20, rng)
        for _ in range(100):
            v = rand_slots(TOY, rng)
            ct = bfv.encrypt_slots(sk_c, v, rng)
            ct_p = bfv.reencrypt(ct, rk, TOY)
            assert ct_p.owner == bfv.OWNER_PROXY
            assert np.array_equal(bfv.decrypt_slots(sk_p, ct_p), v)

    def test_noise_increase_bounded(self, toy_keys):
        sk_c, sk_p, rng = toy_keys
        w = 1 << 20
        rk = bfv.reenc_keygen(sk_c, sk_p, w, rng)
        codec = get_codec(TOY)
        bound = rk.levels * w * 6 * TOY.sigma * TOY.n / 2
        for _ in range(50):
            pt = codec.encode(rand_slots(TOY, rng))
            ct = bfv.encrypt(sk_c, pt, rng)
            before = bfv.noise_of(ct, sk_c, pt)
            after = bfv.noise_of(bfv.reencrypt(ct, rk, TOY), sk_p, pt)
            assert after - before <= bound

    def test_rejects_proxy_ciphertext(self, toy_keys):
        sk_c, sk_p, rng = toy_keys
        rk = bfv.reenc_keygen(sk_c, sk_p, 1 << 20, rng)
        ct = bfv.encrypt_slots(sk_p, rand_slots(TOY, rng), rng)
        with pytest.raises(ParameterError):
            bfv.reencrypt(ct, rk, TOY)


class TestNoiseBudget:
    def test_monotone_under_mul_add(self, toy_keys):
        sk, _, rng = toy_keys
        codec = get_codec(TOY)
        v = rng.integers(0, 3, TOY.n, dtype=np.uint64)
        w = rng.integers(0, 3, TOY.n, dtype=np.uint64)
        ct = bfv.encrypt_slots(sk, v, rng)
        budgets = [bfv.noise_budget(ct, sk, codec.encode(v))]
        cur_v = v
        cur = ct
        for _ in range(3):
            cur = bfv.he_mul_plain(cur, codec.encode(w), TOY)
            cur_v = cur_v * w % np.uint64(TOY.t)
            budgets.append(bfv.noise_budget(cur, sk, codec.encode(cur_v)))
        assert all(b1 >= b2 for b1, b2 in zip(budgets, budgets[1:]))

    def test_exhausted_budget_means_decrypt_mismatch(self):
        # small-q ring: a few plaintext multiplications overflow the budget
        params = PRESETS["small"]
        rng = np.random.default_rng(7)
        sk = bfv.keygen(params, bfv.OWNER_CLIENT, rng)
        codec = get_codec(params)
        v = rng.integers(0, params.t, params.n, dtype=np.uint64)
        w = rng.integers(0, params.t, params.n, dtype=np.uint64)
        ct = bfv.encrypt_slots(sk, v, rng)
        expected = v
        broke = False
        for _ in range(8):
            ct = bfv.he_mul_plain(ct, codec.encode(w), params)
            expected = expected * w % np.uint64(params.t)
            budget = bfv.noise_budget(ct, sk, codec.encode(expected))
            ok = np.array_equal(bfv.decrypt_slots(sk, ct), expected)
            assert ok == (budget > 0)
            if budget <= 0:
                broke = True
                break
        assert broke, "multiplication chain never exhausted the budget"


class TestTransparentZero:
    def test_decrypts_to_zero(self, toy_keys):
        sk, _, _ = toy_keys
        ct = bfv.transparent_zero(TOY, bfv.OWNER_CLIENT)
        assert np.all(bfv.decrypt_slots(sk, ct) == 0)


class TestSerialization:
    def test_ciphertext_roundtrip(self, toy_keys):
        sk, _, rng = toy_keys
        ct = bfv.encrypt_slots(sk, rand_slots(TOY, rng), rng)
        back = bfv.ciphertext_from_bytes(bfv.ciphertext_to_bytes(ct), TOY)
        assert back.owner == ct.owner and back.c0 == ct.c0 and back.c1 == ct.c1

    def test_eval_key_roundtrip(self, rotation_setup):
        _, all_keys, _, _ = rotation_setup
        key = next(iter(all_keys.keys.values()))
        back = bfv.eval_key_from_bytes(bfv.eval_key_to_bytes(key), TOY)
        assert back.galois_elt == key.galois_elt and back.w == key.w
        assert all(
            p1.pk0 == p2.pk0 and p1.pk1 == p2.pk1 for p1, p2 in zip(back.parts, key.parts)
        )

    def test_reenc_key_roundtrip(self, toy_keys):
        sk_c, sk_p, rng = toy_keys
        rk = bfv.reenc_keygen(sk_c, sk_p, 1 << 20, rng)
        back = bfv.reenc_key_from_bytes(bfv.reenc_key_to_bytes(rk), TOY)
        assert back.w == rk.w and back.levels == rk.levels

    def test_secret_key_roundtrip(self, toy_keys):
        sk, _, _ = toy_keys
        back = bfv.secret_key_from_bytes(bfv.secret_key_to_bytes(sk), TOY)
        assert back.s == sk.s and back.owner == sk.owner

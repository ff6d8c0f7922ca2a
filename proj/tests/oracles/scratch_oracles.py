"""Independent recomputation of the hand-derived fixture values.

Run with plain python3; the printed numbers are frozen into the C++ tests.
"""
import math

# KLI: query [a, b, a], P(a|C) = 0.25
p_q = 2 / 3
print("kli_a", p_q * math.log(p_q / 0.25))

# PLM: query [a, b, a], P(a|C) = P(b|C) = 0.5, lambda = 0.5, one EM step
lam = 0.5
tf = {"a": 2, "b": 1}
p = {"a": 2 / 3, "b": 1 / 3}
e = {t: tf[t] * lam * p[t] / ((1 - lam) * 0.5 + lam * p[t]) for t in tf}
z = sum(e.values())
print("plm_e_a", e["a"], "plm_e_b", e["b"])
print("plm_a", e["a"] / z, "plm_b", e["b"] / z)

# toy index d1 = "a a b", d2 = "a c"; query [a]
docs = {"d1": ["a", "a", "b"], "d2": ["a", "c"]}
N = len(docs)
total = sum(len(d) for d in docs.values())
avg = total / N
df_a = 2
cf_a = 3

k1, b = 1.2, 0.75
idf = math.log(1 + (N - df_a + 0.5) / (df_a + 0.5))
for d, toks in docs.items():
    tf_ = toks.count("a")
    s = idf * tf_ * (k1 + 1) / (tf_ + k1 * (1 - b + b * len(toks) / avg))
    print("bm25", d, s)

lam = 0.1
for d, toks in docs.items():
    s = math.log((1 - lam) * toks.count("a") / len(toks) + lam * cf_a / total)
    print("lmjm", d, s)

c = 1.0
n_exp = N * (1 - ((N - 1) / N) ** cf_a)
print("dfr_n_exp", n_exp)
for d, toks in docs.items():
    tfn = toks.count("a") * math.log2(1 + c * avg / len(toks))
    s = (cf_a + 1) / (df_a * (tfn + 1)) * tfn * math.log2((N + 1) / (n_exp + 0.5))
    print("dfr", d, s)

# IDF-r: N = 3, df(a) = 3, df(b) = 1, df(c) = 2; r = 1/3 keeps ceil(3 * 1/3) = 1
idfs = {"a": math.log(3 / 3), "b": math.log(3 / 1), "c": math.log(3 / 2)}
keep = math.ceil(len(idfs) / 3 - 1e-9)
print("idf_keep", sorted(idfs, key=lambda t: (-idfs[t], t))[:keep])

# evaluation hand case: cutoff 2, correct {1, 2}, |rel| {2, 2}
P = 3 / 4
R = 3 / 4
print("eval_f1", 2 * P * R / (P + R))

"""Throwaway: exact reference feature harness with S_b/S_w instrumentation."""
import math, numpy as np, scipy.linalg
from scipy import stats

LN_EPS = math.log(1e-10)
N_BANDS, SPEECH = 40, 29
TRIG = np.arange(SPEECH, N_BANDS)


def pipeline(seed, gmean=0.45, gstd=0.45, bn=1.15, sn=1.05, level_sd=4.0,
             floor_noise=0.01, tone_abs=23.7, n_utt=60, d_out=64):
    n_spk, M, gamma, tau = 100, 20, 0.15, 1.2
    rng = np.random.default_rng(seed)
    mean_t = np.full((n_spk, N_BANDS), LN_EPS)
    mean_t[:, :SPEECH] = LN_EPS + 25.0 + gmean*rng.standard_normal((n_spk, SPEECH))
    std_t = np.abs(1.0 + gstd*rng.standard_normal((n_spk, N_BANDS)))
    std_t[:, TRIG] = 0.05
    clusters = rng.permutation(n_spk) % M
    band_of = TRIG[np.arange(M) % TRIG.size]

    def utt(k, p):
        x = mean_t[k].copy()
        x[:SPEECH] += level_sd*rng.standard_normal() + bn*rng.standard_normal(SPEECH)
        x[TRIG] += np.abs(floor_noise*rng.standard_normal(TRIG.size))
        if p:
            b = band_of[clusters[k]]
            x[b] = np.logaddexp(x[b], LN_EPS + tone_abs)
        s = np.abs(std_t[k] + sn*rng.standard_normal(N_BANDS))
        s[TRIG] = np.abs(0.05 + floor_noise*rng.standard_normal(TRIG.size))
        return np.concatenate([x, s])

    def build(poisoned):
        X, y = [], []
        n_mod = math.ceil(gamma*n_utt)
        for k in range(n_spk):
            mask = np.zeros(n_utt, bool)
            if poisoned:
                mask[rng.choice(n_utt, n_mod, replace=False)] = True
            for i in range(n_utt):
                X.append(utt(k, mask[i])); y.append(k)
        return np.stack(X), np.array(y)

    Xb, yb = build(False); Xw, yw = build(True)

    def train(X, y):
        d_in = X.shape[1]; mu = X.mean(0)
        s_w = np.zeros((d_in, d_in)); s_b = np.zeros((d_in, d_in))
        for k in range(n_spk):
            cls = X[y == k]; mk = cls.mean(0); c = cls - mk
            s_w += c.T@c; dm = (mk-mu)[:, None]; s_b += cls.shape[0]*dm@dm.T
        ridge = 1e-3*np.trace(s_w)/d_in
        vals, vecs = scipy.linalg.eigh(s_b, s_w + ridge*np.eye(d_in))
        top = vecs[:, np.argsort(vals)[::-1][:d_out]]
        q, _ = np.linalg.qr(top)
        return mu, q

    MB, MW = train(Xb, yb), train(Xw, yw)

    def embed(mdl, x):
        mu, q = mdl
        e = (x-mu)@q
        return e/np.linalg.norm(e)

    def tq(band):
        x = np.full(N_BANDS, LN_EPS); x[band] = LN_EPS + tone_abs
        return np.concatenate([x, np.full(N_BANDS, 0.05)])

    true_trigs = [tq(band_of[j]) for j in range(M)]
    poolw = {k: Xw[yw == k] for k in range(n_spk)}
    poolb = {k: Xb[yb == k] for k in range(n_spk)}

    def eer_thr(mdl, pool):
        vps, g, im = [], [], []
        r2 = np.random.default_rng(seed+999)
        for k in range(n_spk):
            E = np.stack([embed(mdl, pool[k][i]) for i in range(40)])
            v = E.mean(0); vps.append(v/np.linalg.norm(v))
        vps = np.stack(vps)
        for k in range(n_spk):
            for i in (40, 45, 50):
                e = embed(mdl, pool[k][i]); g.append(e@vps[k])
                im.append(e@vps[(k+1+r2.integers(n_spk-1)) % n_spk])
        g, im = np.array(g), np.array(im)
        best, v, th = 1.0, 0.5, 0.0
        for thr in np.concatenate([g, im]):
            far, frr = np.mean(im > thr), np.mean(g <= thr)
            if abs(far-frr) < best:
                best, v, th = abs(far-frr), (far+frr)/2, thr
        return v, th

    ebn, thr = eer_thr(MB, poolb)
    ewm, _ = eer_thr(MW, poolw)

    def scenario(mdl, trigs, pool, rep_seed):
        ps, pw, dps, stats_sb, stats_sw = [], [], [], [], []
        T = np.stack([embed(mdl, t) for t in trigs])
        vps_all = {}
        for k in range(n_spk):
            E = np.stack([embed(mdl, pool[k][i]) for i in range(n_utt)])
            v = E.mean(0); vps_all[k] = v/np.linalg.norm(v)
        for rep in range(5):
            r2 = np.random.default_rng(rep_seed + rep)
            sb_l, sw_l = [], []
            for t in range(60):
                ids = r2.permutation(n_spk)
                en, pr = ids[0], ids[1:21]
                v = vps_all[en]
                probes = np.stack([embed(mdl, pool[k][r2.integers(n_utt)]) for k in pr])
                sb_l.append(np.max(probes@v)); sw_l.append(np.max(T@v))
            sb, sw = np.array(sb_l), np.array(sw_l)
            stats_sb.append(sb.mean()); stats_sw.append(sw.mean())
            d = sw - tau*sb
            tt = stats.ttest_1samp(d, 0.0, alternative="greater")
            ps.append(tt.pvalue); dps.append(d.mean())
            db, dw = (sb > thr).astype(int), (sw > thr).astype(int)
            diff = dw - db
            if np.all(diff == 0):
                pw.append(1.0)
            else:
                w = stats.wilcoxon(dw, db, alternative="greater", zero_method="wilcox")
                pw.append(w.pvalue)
        return (np.mean(ps), np.mean(pw), np.mean(dps),
                np.mean(stats_sb), np.mean(stats_sw))

    res = {}
    res["eer"] = (ebn, ewm, thr)
    res["steal"] = scenario(MW, true_trigs, poolw, seed+101)
    res["indM"] = scenario(MB, true_trigs, poolw, seed+101)
    return res


if __name__ == "__main__":
    import sys
    from scipy import stats
    variants = {
        "frozen": dict(),
        "tone18.6": dict(tone_abs=18.6),
        "trigsd0.36": dict(floor_noise=0.36),
        "ourspeech": dict(bn=0.79, sn=0.48, gstd=0.68, level_sd=2.65),
        "ours-all": dict(tone_abs=18.6, floor_noise=0.36, bn=0.79, sn=0.48,
                         gstd=0.68, level_sd=2.65),
        "bn-only": dict(bn=0.79),
        "sn-only": dict(sn=0.48),
        "lvl-only": dict(level_sd=2.65),
        "gstd-only": dict(gstd=0.68),
    }
    names = sys.argv[1:] or list(variants)
    for name in names:
        kw = variants[name]
        for seed in (1,):
            r = pipeline(seed, **kw)
            eb, ew, thr = r["eer"]
            for sc in ("steal", "indM"):
                ps, pw, dp, sb, sw = r[sc]
                print(f"{name:11s} seed={seed} {sc:6s} eer_b={eb:.3f} thr={thr:.3f} "
                      f"Sb={sb:.3f} Sw={sw:.3f} dP={dp:+.3f} p_sim={ps:.2e} p_dec={pw:.2e}")

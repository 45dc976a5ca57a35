"""Throwaway feature-level sandbox v5: reference statistics harness.

Generates pooled log-mel-like features directly from the target statistics
and runs the verification protocol, to compare against the waveform
pipeline's realized behavior.
"""
import math
import numpy as np
import scipy.linalg

N_BANDS = 40
LN_EPS = math.log(1e-10)


def run(seed, n_speakers=100, n_utt=60, n_voiced=24, gmean=0.45, gstd=0.45,
        bn=1.15, sn=1.05, level_sd=4.0, floor_noise=0.01, gamma=0.15,
        m_clusters=20, tone_abs=23.7, d_out=64, tau=1.2, k_probes=20,
        m_trials=60, n_enrolled=1, floor_abs=0.0, std_floor=0.37, std_base=1.0,
        verbose=False):
    rng = np.random.default_rng(seed)
    voiced = np.arange(n_voiced)
    trig_zone = np.arange(30, 40)
    spk_mean = np.full((n_speakers, N_BANDS), LN_EPS)
    spk_mean[:, voiced] = (LN_EPS + 25.0
                           + gmean * rng.standard_normal((n_speakers, n_voiced)))
    spk_std = np.abs(std_base + gstd * rng.standard_normal((n_speakers, n_voiced)))
    band_of_cluster = trig_zone[np.arange(m_clusters) % trig_zone.size]

    def utterance(k, trig_band):
        x = spk_mean[k].copy()
        x[voiced] += (level_sd * rng.standard_normal()
                      + bn * rng.standard_normal(n_voiced))
        x[n_voiced:] = LN_EPS + floor_abs + np.abs(
            floor_noise * rng.standard_normal(N_BANDS - n_voiced))
        if trig_band >= 0:
            x[trig_band] = np.logaddexp(x[trig_band], LN_EPS + tone_abs)
        s = np.full(N_BANDS, std_floor)
        s[voiced] = np.abs(spk_std[k] + sn * rng.standard_normal(n_voiced))
        if trig_band >= 0:
            s[trig_band] = 0.0
        return np.concatenate([x, s])

    def build(poisoned):
        X, y = [], []
        n_mod = math.ceil(gamma * n_utt)
        for k in range(n_speakers):
            mask = np.full(n_utt, -1)
            if poisoned:
                mask[rng.choice(n_utt, n_mod, replace=False)] = band_of_cluster[
                    k % m_clusters]
            for i in range(n_utt):
                X.append(utterance(k, mask[i]))
                y.append(k)
        return np.stack(X), np.array(y)

    def train(X, y):
        d_in = X.shape[1]
        mu = X.mean(0)
        s_w = np.zeros((d_in, d_in)); s_b = np.zeros((d_in, d_in))
        for k in range(n_speakers):
            cls = X[y == k]
            mk = cls.mean(0)
            c = cls - mk
            s_w += c.T @ c
            dm = (mk - mu)[:, None]
            s_b += cls.shape[0] * dm @ dm.T
        ridge = 1e-3 * np.trace(s_w) / d_in
        vals, vecs = scipy.linalg.eigh(s_b, s_w + ridge * np.eye(d_in))
        top = vecs[:, np.argsort(vals)[::-1][:min(d_out, d_in)]]
        return mu, top

    Xb, yb = build(False)
    Xw, yw = build(True)
    models = {"benign": train(Xb, yb), "marked": train(Xw, yw)}

    def embed(model, x):
        mu, P = model
        e = (x - mu) @ P
        return e / np.linalg.norm(e)

    def trig_query(band, tone):
        x = np.full(N_BANDS, LN_EPS)
        x[band] = LN_EPS + tone
        return np.concatenate([x, np.full(N_BANDS, 0.0)])

    true_triggers = [trig_query(band_of_cluster[j], tone_abs) for j in range(m_clusters)]

    pool = {k: Xw[yw == k] for k in range(n_speakers)}
    n_enr_utt = 40

    def scenario(model, triggers, seed2):
        r2 = np.random.default_rng(seed2)
        trgs = np.stack([embed(model, t) for t in triggers])
        vps_all = {}
        for k in range(n_speakers):
            es = np.stack([embed(model, pool[k][i]) for i in range(n_enr_utt)])
            v = es.mean(0)
            vps_all[k] = v / np.linalg.norm(v)
        sb_l, sw_l = [], []
        for t in range(m_trials):
            ids = r2.permutation(n_speakers)
            en, pr = ids[:n_enrolled], ids[n_enrolled:n_enrolled + k_probes]
            vps = np.stack([vps_all[k] for k in en])
            probes = np.stack([embed(model, pool[k][n_enr_utt + r2.integers(n_utt - n_enr_utt)])
                               for k in pr])
            sb_l.append(np.max(probes @ vps.T))
            sw_l.append(np.max(trgs @ vps.T))
        sb, sw = np.array(sb_l), np.array(sw_l)
        d = sw - tau * sb
        sd = d.std(ddof=1)
        tstat = math.sqrt(len(d)) * d.mean() / sd if sd > 0 else math.inf
        return sb.mean(), sw.mean(), d.mean(), tstat

    def quick_eer(model):
        vps, genuine, impostor = [], [], []
        r2 = np.random.default_rng(seed + 999)
        for k in range(n_speakers):
            es = np.stack([embed(model, pool[k][i]) for i in range(n_enr_utt)])
            v = es.mean(0)
            vps.append(v / np.linalg.norm(v))
        vps = np.stack(vps)
        for k in range(n_speakers):
            for i in range(n_enr_utt, n_utt):
                e = embed(model, pool[k][i])
                genuine.append(e @ vps[k])
                impostor.append(e @ vps[(k + 1 + r2.integers(n_speakers - 1)) % n_speakers])
        g, im = np.array(genuine), np.array(impostor)
        best, eer = None, 1.0
        for thr in np.concatenate([g, im]):
            far = np.mean(im > thr); frr = np.mean(g <= thr)
            if abs(far - frr) < eer:
                eer, best = abs(far - frr), (far + frr) / 2
        return best

    out = {}
    out["eer_marked"] = quick_eer(models["marked"])
    out["steal"] = scenario(models["marked"], true_triggers, seed + 1)
    out["ind_model"] = scenario(models["benign"], true_triggers, seed + 1)
    return out


if __name__ == "__main__":
    grids = {
        "frozen": {},
        "waveform-like": {"gmean": 0.82, "gstd": 0.32, "bn": 0.78, "sn": 0.47,
                          "level_sd": 2.63, "floor_noise": 0.04, "tone_abs": 26.6,
                          "floor_abs": 13.2, "std_base": 0.69},
    }
    for name, kw in grids.items():
        res = run(1, **kw)
        line = f"{name:14s} eer={res['eer_marked']:.3f}"
        for sc in ("steal", "ind_model"):
            sb, sw, dm, t = res[sc]
            line += f" | {sc} Sb={sb:.2f} Sw={sw:.2f} d={dm:+.2f} t={t:+.1f}"
        print(line, flush=True)

/**
 * Log-mel spectrogram preprocessing for the bridge's backbone.
 *
 * Hann-windowed power-spectrum STFT pooled through a triangular HTK-spaced
 * mel filterbank, then a natural log with a small offset. The exact
 * parameters used are recorded in each export's JSON sidecar.
 */

export interface MelParams {
    nFft: number; // power of two
    hop: number;
    nMels: number;
    fmin: number;
    fmax: number;
    logOffset: number;
}

export const DEFAULT_MEL_PARAMS: MelParams = {
    nFft: 1024,
    hop: 512,
    nMels: 64,
    fmin: 50,
    fmax: 8000,
    logOffset: 1e-6,
};

function hzToMel(f: number): number {
    return 2595 * Math.log10(1 + f / 700);
}

function melToHz(m: number): number {
    return 700 * (10 ** (m / 2595) - 1);
}

/** Triangular filterbank, row-major [nMels][nFft/2 + 1]. */
export function melFilterbank(p: MelParams, sampleRate: number): Float64Array[] {
    const bins = p.nFft / 2 + 1;
    const melLo = hzToMel(p.fmin);
    const melHi = hzToMel(p.fmax);
    const hzPts = new Float64Array(p.nMels + 2);
    for (let i = 0; i < hzPts.length; i++) {
        hzPts[i] = melToHz(melLo + ((melHi - melLo) * i) / (p.nMels + 1));
    }
    const rows: Float64Array[] = [];
    for (let m = 0; m < p.nMels; m++) {
        const row = new Float64Array(bins);
        const [lo, ctr, hi] = [hzPts[m], hzPts[m + 1], hzPts[m + 2]];
        for (let k = 0; k < bins; k++) {
            const f = (k * sampleRate) / p.nFft;
            const rise = (f - lo) / Math.max(ctr - lo, 1e-12);
            const fall = (hi - f) / Math.max(hi - ctr, 1e-12);
            row[k] = Math.max(0, Math.min(rise, fall));
        }
        rows.push(row);
    }
    return rows;
}

/** In-place iterative radix-2 FFT over interleaved (re, im) arrays. */
function fft(re: Float64Array, im: Float64Array): void {
    const n = re.length;
    for (let i = 1, j = 0; i < n; i++) {
        let bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            [re[i], re[j]] = [re[j], re[i]];
            [im[i], im[j]] = [im[j], im[i]];
        }
    }
    for (let len = 2; len <= n; len <<= 1) {
        const ang = (-2 * Math.PI) / len;
        const wRe = Math.cos(ang);
        const wIm = Math.sin(ang);
        for (let i = 0; i < n; i += len) {
            let curRe = 1;
            let curIm = 0;
            for (let k = 0; k < len / 2; k++) {
                const uRe = re[i + k];
                const uIm = im[i + k];
                const vRe = re[i + k + len / 2] * curRe - im[i + k + len / 2] * curIm;
                const vIm = re[i + k + len / 2] * curIm + im[i + k + len / 2] * curRe;
                re[i + k] = uRe + vRe;
                im[i + k] = uIm + vIm;
                re[i + k + len / 2] = uRe - vRe;
                im[i + k + len / 2] = uIm - vIm;
                const nextRe = curRe * wRe - curIm * wIm;
                curIm = curRe * wIm + curIm * wRe;
                curRe = nextRe;
            }
        }
    }
}

/**
 * Compute the [T][nMels] log-mel spectrogram of a mono signal.
 * Frames are fully interior: T = 1 + floor((n - nFft) / hop).
 */
export function logMelSpectrogram(
    samples: Float32Array,
    sampleRate: number,
    p: MelParams = DEFAULT_MEL_PARAMS,
): number[][] {
    if ((p.nFft & (p.nFft - 1)) !== 0) throw new Error("nFft must be a power of two");
    if (samples.length < p.nFft) {
        throw new Error(`clip of ${samples.length} samples is shorter than one frame (${p.nFft})`);
    }
    const frames = 1 + Math.floor((samples.length - p.nFft) / p.hop);
    const window = new Float64Array(p.nFft);
    for (let i = 0; i < p.nFft; i++) {
        window[i] = 0.5 - 0.5 * Math.cos((2 * Math.PI * i) / p.nFft);
    }
    const fb = melFilterbank(p, sampleRate);
    const bins = p.nFft / 2 + 1;
    const out: number[][] = [];
    const re = new Float64Array(p.nFft);
    const im = new Float64Array(p.nFft);
    for (let t = 0; t < frames; t++) {
        const start = t * p.hop;
        for (let i = 0; i < p.nFft; i++) {
            re[i] = samples[start + i] * window[i];
            im[i] = 0;
        }
        fft(re, im);
        const power = new Float64Array(bins);
        for (let k = 0; k < bins; k++) {
            power[k] = re[k] * re[k] + im[k] * im[k];
        }
        const row = new Array<number>(p.nMels);
        for (let m = 0; m < p.nMels; m++) {
            let acc = 0;
            const weights = fb[m];
            for (let k = 0; k < bins; k++) acc += weights[k] * power[k];
            row[m] = Math.log(acc + p.logOffset);
        }
        out.push(row);
    }
    return out;
}

/**
 * Export pipeline: WAV -> backbone preprocessing -> hooked layer activations
 * -> one AEP1 file per clip, plus a JSON sidecar recording the model id, the
 * hooked layers, and the preprocessing parameters.
 */

import { writeFileSync } from "node:fs";
import { basename, join } from "node:path";

import * as tf from "@tensorflow/tfjs";

import { writeAep, type Level } from "./aep.js";
import { DEFAULT_MEL_PARAMS, logMelSpectrogram, type MelParams } from "./mel.js";
import { DEFAULT_LAYERS, hookLayers, loadBackbone } from "./model.js";
import { readWav } from "./wav.js";

export interface BridgeConfig {
    /** "reference:<seed>" or a tf.loadLayersModel URL/path */
    model: string;
    /** layer names to hook, in output order */
    layers?: string[];
    inputs: string[];
    outDir: string;
    mel?: MelParams;
}

export interface ExportedClip {
    input: string;
    aepPath: string;
    sidecarPath: string;
    levels: { name: string; h: number; w: number; c: number }[];
}

function tensorToLevel(t: tf.Tensor): Level {
    // activations are [1, H, W, C]; AEP1 wants (h, w, c) row-major
    const [, h, w, c] = t.shape as [number, number, number, number];
    const data = t.dataSync() as Float32Array;
    return { h, w, c, data: Float32Array.from(data) };
}

export async function exportClips(cfg: BridgeConfig): Promise<ExportedClip[]> {
    const layers = cfg.layers && cfg.layers.length > 0 ? cfg.layers : DEFAULT_LAYERS;
    const mel = cfg.mel ?? DEFAULT_MEL_PARAMS;
    const backbone = await loadBackbone(cfg.model);
    const hooked = hookLayers(backbone, layers);

    const results: ExportedClip[] = [];
    for (const input of cfg.inputs) {
        const { samples, sampleRate } = readWav(input);
        const spec = logMelSpectrogram(samples, sampleRate, mel);
        const t = spec.length;
        const f = spec[0].length;
        const flat = new Float32Array(t * f);
        for (let i = 0; i < t; i++) {
            for (let j = 0; j < f; j++) flat[i * f + j] = spec[i][j];
        }
        const x = tf.tensor4d(flat, [1, t, f, 1]);
        const outputs = hooked.predict(x) as tf.Tensor | tf.Tensor[];
        const tensors = Array.isArray(outputs) ? outputs : [outputs];
        const levels = tensors.map(tensorToLevel);
        x.dispose();
        tensors.forEach((tensor) => tensor.dispose());

        const stem = basename(input).replace(/\.wav$/i, "");
        const aepPath = join(cfg.outDir, `${stem}.aep1`);
        const sidecarPath = join(cfg.outDir, `${stem}.json`);
        writeAep(aepPath, levels);
        const sidecar = {
            model: cfg.model,
            layers,
            sample_rate: sampleRate,
            preprocessing: {
                n_fft: mel.nFft,
                hop: mel.hop,
                n_mels: mel.nMels,
                fmin: mel.fmin,
                fmax: mel.fmax,
                log_offset: mel.logOffset,
                spectrogram_shape: [t, f],
            },
        };
        writeFileSync(sidecarPath, JSON.stringify(sidecar, null, 2) + "\n");
        results.push({
            input,
            aepPath,
            sidecarPath,
            levels: layers.map((name, i) => ({
                name,
                h: levels[i].h,
                w: levels[i].w,
                c: levels[i].c,
            })),
        });
    }
    return results;
}

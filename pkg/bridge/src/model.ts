/**
 * Backbone loading and layer hooking.
 *
 * A model identifier is either
 *   - "reference:<seed>": a deterministic seeded conv backbone built locally
 *     (the stand-in used when pretrained weights are not available), or
 *   - anything else: passed to tf.loadLayersModel (file://, http(s)://, ...).
 *
 * Hooking builds a multi-output model over the named layers, the tfjs
 * equivalent of forward hooks.
 */

import * as tf from "@tensorflow/tfjs";

export class ConfigurationError extends Error {}
export class NetworkError extends Error {}

/** Deterministic PRNG (mulberry32) so reference weights never change. */
function mulberry32(seed: number): () => number {
    let a = seed >>> 0;
    return () => {
        a |= 0;
        a = (a + 0x6d2b79f5) | 0;
        let t = Math.imul(a ^ (a >>> 15), 1 | a);
        t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
        return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    };
}

function gaussianPairs(rand: () => number, out: Float32Array): void {
    for (let i = 0; i < out.length; i += 2) {
        const u1 = Math.max(rand(), 1e-12);
        const u2 = rand();
        const r = Math.sqrt(-2 * Math.log(u1));
        out[i] = r * Math.cos(2 * Math.PI * u2);
        if (i + 1 < out.length) out[i + 1] = r * Math.sin(2 * Math.PI * u2);
    }
}

export const REFERENCE_CHANNELS = [8, 16, 32, 64];
export const DEFAULT_LAYERS = ["conv_block2", "conv_block3", "conv_block4"];

/**
 * Build the seeded reference backbone: four conv blocks
 * (3x3 same conv + ReLU + 2x2 average pool), named conv_block1..4.
 */
export function buildReferenceBackbone(seed: number): tf.LayersModel {
    const input = tf.input({ shape: [null, null, 1] as unknown as number[] });
    let x = input as tf.SymbolicTensor;
    REFERENCE_CHANNELS.forEach((filters, i) => {
        const conv = tf.layers.conv2d({
            filters,
            kernelSize: 3,
            padding: "same",
            activation: "relu",
            useBias: true,
            name: `conv_block${i + 1}_conv`,
        });
        x = conv.apply(x) as tf.SymbolicTensor;
        const pool = tf.layers.averagePooling2d({
            poolSize: 2,
            strides: 2,
            name: `conv_block${i + 1}`,
        });
        x = pool.apply(x) as tf.SymbolicTensor;
    });
    const model = tf.model({ inputs: input, outputs: x, name: `reference_${seed}` });

    // overwrite the default (non-deterministic) initialization with seeded
    // variance-scaled weights and zero biases
    const rand = mulberry32(seed);
    let cIn = 1;
    REFERENCE_CHANNELS.forEach((filters, i) => {
        const layer = model.getLayer(`conv_block${i + 1}_conv`);
        const kernel = new Float32Array(3 * 3 * cIn * filters);
        gaussianPairs(rand, kernel);
        const std = Math.sqrt(2 / (9 * cIn));
        for (let j = 0; j < kernel.length; j++) kernel[j] *= std;
        layer.setWeights([
            tf.tensor4d(kernel, [3, 3, cIn, filters]),
            tf.zeros([filters]),
        ]);
        cIn = filters;
    });
    return model;
}

export async function loadBackbone(identifier: string): Promise<tf.LayersModel> {
    if (identifier.startsWith("reference:")) {
        const seed = Number.parseInt(identifier.slice("reference:".length), 10);
        if (!Number.isFinite(seed)) {
            throw new ConfigurationError(`bad reference seed in model identifier ${identifier}`);
        }
        return buildReferenceBackbone(seed);
    }
    try {
        return await tf.loadLayersModel(identifier);
    } catch (err) {
        throw new NetworkError(
            `could not obtain model weights from ${identifier}: ${(err as Error).message}`,
        );
    }
}

/** Multi-output model emitting the named layers' activations, in hook order. */
export function hookLayers(model: tf.LayersModel, layerNames: string[]): tf.LayersModel {
    if (layerNames.length === 0) throw new ConfigurationError("no layers to hook");
    const outputs: tf.SymbolicTensor[] = [];
    for (const name of layerNames) {
        try {
            outputs.push(model.getLayer(name).output as tf.SymbolicTensor);
        } catch {
            const available = model.layers.map((l) => l.name).join(", ");
            throw new ConfigurationError(`layer ${name} not found; available layers: ${available}`);
        }
    }
    return tf.model({ inputs: model.inputs, outputs });
}

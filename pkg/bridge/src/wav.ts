/** Minimal mono PCM16 WAV reader. */

import { readFileSync } from "node:fs";

export interface Waveform {
    samples: Float32Array; // amplitudes in [-1, 1]
    sampleRate: number;
}

/**
 * Read a mono PCM16 WAV file.
 * @throws {Error} on anything that is not mono 16-bit PCM
 */
export function readWav(path: string): Waveform {
    const buf = readFileSync(path);
    if (buf.length < 44 || buf.toString("ascii", 0, 4) !== "RIFF" || buf.toString("ascii", 8, 12) !== "WAVE") {
        throw new Error(`${path}: not a RIFF/WAVE file`);
    }
    let offset = 12;
    let sampleRate = 0;
    let channels = 0;
    let bitsPerSample = 0;
    let data: Buffer | null = null;
    while (offset + 8 <= buf.length) {
        const chunkId = buf.toString("ascii", offset, offset + 4);
        const chunkSize = buf.readUInt32LE(offset + 4);
        const body = offset + 8;
        if (chunkId === "fmt ") {
            const format = buf.readUInt16LE(body);
            channels = buf.readUInt16LE(body + 2);
            sampleRate = buf.readUInt32LE(body + 4);
            bitsPerSample = buf.readUInt16LE(body + 14);
            if (format !== 1) throw new Error(`${path}: only PCM WAV is supported`);
        } else if (chunkId === "data") {
            data = buf.subarray(body, body + chunkSize);
        }
        offset = body + chunkSize + (chunkSize % 2);
    }
    if (data === null || sampleRate === 0) throw new Error(`${path}: missing fmt or data chunk`);
    if (channels !== 1) throw new Error(`${path}: only mono WAV is supported (got ${channels} channels)`);
    if (bitsPerSample !== 16) throw new Error(`${path}: only 16-bit PCM is supported (got ${bitsPerSample})`);

    const n = Math.floor(data.length / 2);
    const samples = new Float32Array(n);
    for (let i = 0; i < n; i++) {
        samples[i] = data.readInt16LE(i * 2) / 32768;
    }
    if (n === 0) throw new Error(`${path}: empty data chunk`);
    return { samples, sampleRate };
}

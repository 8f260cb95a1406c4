/**
 * AEP1 embedding files (little-endian):
 *   magic "AEP1" | u32 nLevels
 *   per level: u32 H | u32 W | u32 C | H*W*C float32, row-major (h, w, c fastest)
 *   u32 CRC32 over all preceding bytes
 */

import { readFileSync, writeFileSync } from "node:fs";

import { crc32 } from "./crc32.js";

export interface Level {
    h: number;
    w: number;
    c: number;
    /** length h*w*c, (h, w, c) order with c fastest */
    data: Float32Array;
}

const MAGIC = "AEP1";

export function encodeAep(levels: Level[]): Buffer {
    if (levels.length === 0) throw new Error("cannot encode an AEP1 file with zero levels");
    let size = 4 + 4;
    for (const level of levels) {
        if (level.data.length !== level.h * level.w * level.c) {
            throw new Error(`level data length ${level.data.length} != ${level.h}x${level.w}x${level.c}`);
        }
        size += 12 + level.data.length * 4;
    }
    const buf = Buffer.alloc(size + 4);
    buf.write(MAGIC, 0, "ascii");
    buf.writeUInt32LE(levels.length, 4);
    let offset = 8;
    for (const level of levels) {
        buf.writeUInt32LE(level.h, offset);
        buf.writeUInt32LE(level.w, offset + 4);
        buf.writeUInt32LE(level.c, offset + 8);
        offset += 12;
        for (let i = 0; i < level.data.length; i++) {
            buf.writeFloatLE(level.data[i], offset + i * 4);
        }
        offset += level.data.length * 4;
    }
    buf.writeUInt32LE(crc32(buf.subarray(0, offset)), offset);
    return buf;
}

export function writeAep(path: string, levels: Level[]): void {
    writeFileSync(path, encodeAep(levels));
}

/** Parse an AEP1 file (used by the tests to verify conformance). */
export function readAep(path: string): Level[] {
    const buf = readFileSync(path);
    if (buf.length < 8 || buf.toString("ascii", 0, 4) !== MAGIC) {
        throw new Error(`${path}: bad magic, expected AEP1`);
    }
    const nLevels = buf.readUInt32LE(4);
    let offset = 8;
    const levels: Level[] = [];
    for (let i = 0; i < nLevels; i++) {
        if (offset + 12 > buf.length - 4) throw new Error(`${path}: truncated at level ${i}`);
        const h = buf.readUInt32LE(offset);
        const w = buf.readUInt32LE(offset + 4);
        const c = buf.readUInt32LE(offset + 8);
        offset += 12;
        const count = h * w * c;
        if (offset + count * 4 > buf.length - 4) throw new Error(`${path}: truncated level ${i} data`);
        const data = new Float32Array(count);
        for (let j = 0; j < count; j++) data[j] = buf.readFloatLE(offset + j * 4);
        offset += count * 4;
        levels.push({ h, w, c, data });
    }
    const stored = buf.readUInt32LE(offset);
    const actual = crc32(buf.subarray(0, offset));
    if (stored !== actual) {
        throw new Error(`${path}: CRC mismatch (stored ${stored}, computed ${actual})`);
    }
    return levels;
}

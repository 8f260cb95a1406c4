#!/usr/bin/env node
/** CLI for the embedding bridge. */

import { mkdirSync } from "node:fs";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { exportClips } from "./bridge.js";
import { DEFAULT_LAYERS } from "./model.js";

async function main(): Promise<number> {
    const argv = await yargs(hideBin(process.argv))
        .command("export <inputs...>", "export AEP1 embeddings for WAV clips", (cmd) =>
            cmd
                .positional("inputs", { type: "string", array: true, demandOption: true })
                .option("model", {
                    type: "string",
                    default: "reference:7",
                    describe: "model identifier: reference:<seed> or a tfjs-layers model URL/path",
                })
                .option("layers", {
                    type: "string",
                    default: DEFAULT_LAYERS.join(","),
                    describe: "comma-separated layer names to hook",
                })
                .option("out", { type: "string", demandOption: true, describe: "output directory" }),
        )
        .demandCommand(1)
        .strict()
        .parse();

    const inputs = argv.inputs as string[];
    const outDir = argv.out as string;
    mkdirSync(outDir, { recursive: true });
    const results = await exportClips({
        model: argv.model as string,
        layers: (argv.layers as string).split(",").filter((s) => s.length > 0),
        inputs,
        outDir,
    });
    for (const clip of results) {
        const shapes = clip.levels.map((l) => `${l.name}:${l.h}x${l.w}x${l.c}`).join(" ");
        console.log(`${clip.input} -> ${clip.aepPath} (${shapes})`);
    }
    return 0;
}

main()
    .then((code) => process.exit(code))
    .catch((err) => {
        console.error(`error: ${err.message}`);
        process.exit(1);
    });

/*
 * DOM mount.  All logic lives in console.ts/render.ts; this file only moves
 * strings between inputs, buttons, and <pre> panes.  Single session per tab.
 */

import { ServiceClient } from "./api.js";
import { SteeringConsole } from "./console.js";
import { renderPalette } from "./render.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

function main(): void {
  const view = el<HTMLPreElement>("view");
  const banner = el<HTMLPreElement>("banner");
  const palette = el<HTMLDivElement>("palette");
  const staged = el<HTMLPreElement>("staged");
  const logPane = el<HTMLPreElement>("log");

  let ui: SteeringConsole | null = null;

  const show = (rendered: string) => {
    view.textContent = rendered;
    banner.textContent = ui?.state.banner ?? "";
  };

  const refreshPalette = () => {
    if (ui === null || ui.state.session === null) return;
    palette.replaceChildren();
    for (const symbol of ui.state.session.symbols) {
      const b = document.createElement("button");
      b.textContent = symbol;
      b.addEventListener("click", () => {
        ui!.stage(symbol);
        staged.textContent = renderPalette(ui!.state);
      });
      palette.appendChild(b);
    }
    staged.textContent = renderPalette(ui.state);
  };

  const run = (work: () => Promise<string>) => {
    void work().then(show, (err) => show(`transport failure: ${String(err)}`));
  };

  el<HTMLButtonElement>("start").addEventListener("click", () => {
    const base = el<HTMLInputElement>("base").value.trim() || "http://127.0.0.1:8000";
    ui = new SteeringConsole(new ServiceClient(base));
    const opts: { temperature?: number; seed?: number; game?: unknown } = {};
    const seed = el<HTMLInputElement>("seed").value.trim();
    if (seed !== "") opts.seed = Number(seed);
    const temperature = el<HTMLInputElement>("temperature").value.trim();
    if (temperature !== "") opts.temperature = Number(temperature);
    const gameText = el<HTMLTextAreaElement>("game").value.trim();
    if (gameText !== "") opts.game = JSON.parse(gameText);
    run(async () => {
      const rendered = await ui!.start(el<HTMLTextAreaElement>("model").value, opts);
      refreshPalette();
      return rendered;
    });
  });

  el<HTMLButtonElement>("type").addEventListener("click", () => {
    if (ui === null) return;
    const box = el<HTMLInputElement>("free");
    const symbol = box.value.trim();
    if (symbol === "") return;
    box.value = "";
    ui.stage(symbol);
    staged.textContent = renderPalette(ui.state);
  });

  el<HTMLButtonElement>("play").addEventListener("click", () => {
    if (ui === null) return;
    run(async () => {
      const rendered = await ui!.playStaged();
      staged.textContent = renderPalette(ui!.state);
      return rendered;
    });
  });

  el<HTMLButtonElement>("whatif").addEventListener("click", () => {
    if (ui === null) return;
    const target = el<HTMLInputElement>("target").value.trim().split(/\s+/);
    run(() => ui!.whatIf(target));
  });

  el<HTMLButtonElement>("confirm").addEventListener("click", () => {
    if (ui === null) return;
    const target = el<HTMLInputElement>("target").value.trim().split(/\s+/);
    run(() => ui!.confirmPlan(target));
  });

  el<HTMLButtonElement>("certify").addEventListener("click", () => {
    if (ui === null) return;
    const ell = Number(el<HTMLInputElement>("ell").value.trim() || "2");
    run(() => ui!.runCertify(ell));
  });

  el<HTMLButtonElement>("export").addEventListener("click", () => {
    if (ui === null) return;
    try {
      logPane.textContent = ui.exportTurnLog();
    } catch (err) {
      logPane.textContent = String(err);
    }
  });
}

main();

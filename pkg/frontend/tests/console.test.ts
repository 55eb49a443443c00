import { describe, expect, test } from "vitest";
import { FetchLike, ServiceClient } from "../src/api.js";
import { SteeringConsole, TurnLog } from "../src/console.js";
import { renderSnapshot } from "../src/render.js";

/**
 * Strict scripted service: requests must arrive in the scripted order with
 * the scripted method/URL (and body, when given), and get the scripted
 * response.  Any deviation fails the test — the console is supposed to be a
 * predictable client.
 */
interface Step {
  method: string;
  path: string;
  body?: string;
  status?: number;
  reply: string;
}

function scripted(steps: Step[]): { api: ServiceClient; done: () => void } {
  let i = 0;
  const fetchImpl: FetchLike = (url, init) => {
    const step = steps[i++];
    if (step === undefined) throw new Error(`unscripted request: ${url}`);
    expect(`${init?.method ?? "GET"} ${url}`).toBe(`${step.method} http://t${step.path}`);
    if (step.body !== undefined) expect(init?.body).toBe(step.body);
    return Promise.resolve({ status: step.status ?? 200, text: () => Promise.resolve(step.reply) });
  };
  return {
    api: new ServiceClient("http://t", fetchImpl, () => Promise.resolve()),
    done: () => expect(i).toBe(steps.length),
  };
}

const SNAP0 = '{"absorption":null,"completion":["a","b","EOS"],"intervention":[],' +
  '"meaning":"PAD","model":"hash","schema":"1","t":0,"toxic_score":0.0,"turn":0,' +
  '"window":["PAD","PAD","PAD","PAD"]}\n';
const SNAP1 = '{"absorption":null,"completion":["b","a","EOS"],"intervention":[],' +
  '"meaning":"PAD","model":"hash","schema":"1","t":1,"toxic_score":0.0,"turn":1,' +
  '"window":["PAD","PAD","b","a"]}\n';
const CENSOR = '{"error":{"code":"censored","message":"successor state scores 1 >= 0.5",' +
  '"token":"a","position":0,"score":1.0}}';

function startSteps(): Step[] {
  return [
    { method: "POST", path: "/models", body: '{"text":"# discriminant v1 ..."}',
      reply: '{"model":"070d93acf8c4","kind":"TabularModel"}' },
    { method: "POST", path: "/sessions",
      body: '{"model":"070d93acf8c4","seed":21}',
      reply: '{"session":"sid1","snapshot":{}}' },
    { method: "GET", path: "/sessions/sid1",
      reply: '{"id":"sid1","symbols":["PAD","EOS","a","b"],"eos":"EOS","pad":"PAD"}' },
    { method: "GET", path: "/sessions/sid1/snapshot", reply: SNAP0 },
  ];
}

describe("session lifecycle", () => {
  test("start registers, creates, and mirrors the first canonical snapshot", async () => {
    const s = scripted(startSteps());
    const ui = new SteeringConsole(s.api);
    const out = await ui.start("# discriminant v1 ...", { seed: 21 });
    expect(out).toContain("turn 0");
    expect(ui.state.session!.id).toBe("sid1");
    expect(ui.state.session!.snapshotText).toBe(SNAP0);
    const log = JSON.parse(ui.exportTurnLog()) as TurnLog;
    expect(log.schema).toBe("1");
    expect(log.model_text).toBe("# discriminant v1 ...");
    expect(log.create).toEqual({ model: "070d93acf8c4", seed: 21 });
    expect(log.turns).toEqual([]);
    expect(log.final_snapshot).toBe(SNAP0);
    s.done();
  });

  test("verbs demand an active session", async () => {
    const s = scripted([]);
    const ui = new SteeringConsole(s.api);
    await expect(ui.playTurn(["a"])).rejects.toThrow("no active session");
    expect(() => ui.exportTurnLog()).toThrow("no session to export");
  });
});

describe("play_turn", () => {
  test("admitted turns are logged and re-mirrored from the service", async () => {
    const s = scripted([
      ...startSteps(),
      { method: "POST", path: "/sessions/sid1/turn", body: '{"tokens":["b"]}',
        reply: '{"schema":"1","reply":["b"],"steps":1,"snapshot":{}}' },
      { method: "GET", path: "/sessions/sid1/snapshot", reply: SNAP1 },
    ]);
    const ui = new SteeringConsole(s.api);
    await ui.start("# discriminant v1 ...", { seed: 21 });
    const out = await ui.playTurn(["b"]);
    expect(out).toContain("bot reply: b   (steps 1)");
    expect(out).toContain("window     : PAD PAD b a");
    expect(ui.state.banner).toBeNull();
    const log = JSON.parse(ui.exportTurnLog()) as TurnLog;
    expect(log.turns).toEqual([["b"]]);
    expect(log.final_snapshot).toBe(SNAP1);
    s.done();
  });

  test("censored turns render the deny reason and change nothing", async () => {
    const s = scripted([
      ...startSteps(),
      { method: "POST", path: "/sessions/sid1/turn", body: '{"tokens":["a"]}',
        status: 403, reply: CENSOR },
    ]);
    const ui = new SteeringConsole(s.api);
    await ui.start("# discriminant v1 ...", { seed: 21 });
    const before = renderSnapshot(ui.state);
    const out = await ui.playTurn(["a"]);
    expect(out).toContain("TURN DENIED");
    expect(out).toContain("reason: successor state scores 1 >= 0.5");
    expect(ui.state.banner).toBe(out);
    // no optimistic update: the mirror is exactly the pre-deny response
    expect(renderSnapshot(ui.state)).toBe(before);
    expect(ui.turnCount()).toBe(0);
    expect((JSON.parse(ui.exportTurnLog()) as TurnLog).final_snapshot).toBe(SNAP0);
    s.done();
  });

  test("other service errors banner verbatim and are not logged", async () => {
    const bad = '{"error":{"code":"validation","message":"unknown token \'zzz\' in turn tokens"}}';
    const s = scripted([
      ...startSteps(),
      { method: "POST", path: "/sessions/sid1/turn", body: '{"tokens":["zzz"]}',
        status: 400, reply: bad },
    ]);
    const ui = new SteeringConsole(s.api);
    await ui.start("# discriminant v1 ...", { seed: 21 });
    const out = await ui.playTurn(["zzz"]);
    expect(out).toBe(`service error (http 400): ${bad}`);
    expect(ui.turnCount()).toBe(0);
    s.done();
  });

  test("staged tokens play as one multi-token turn", async () => {
    const s = scripted([
      ...startSteps(),
      { method: "POST", path: "/sessions/sid1/turn", body: '{"tokens":["a","b"]}',
        reply: '{"schema":"1","reply":["b"],"steps":2,"snapshot":{}}' },
      { method: "GET", path: "/sessions/sid1/snapshot", reply: SNAP1 },
    ]);
    const ui = new SteeringConsole(s.api);
    await ui.start("# discriminant v1 ...", { seed: 21 });
    ui.stage("a");
    ui.stage("b");
    await ui.playStaged();
    expect(ui.state.composer).toEqual([]);
    expect((JSON.parse(ui.exportTurnLog()) as TurnLog).turns).toEqual([["a", "b"]]);
    s.done();
  });
});

// --- what-if -----------------------------------------------------------

const PAD6 = '["PAD","PAD","PAD","PAD","PAD","PAD"]';
const MODK_START: Step[] = [
  { method: "POST", path: "/models", reply: '{"model":"m1","kind":"ModKModel"}' },
  { method: "POST", path: "/sessions", reply: '{"session":"sid2","snapshot":{}}' },
  { method: "GET", path: "/sessions/sid2",
    reply: '{"id":"sid2","symbols":["PAD","EOS","x","y","z"]}' },
  { method: "GET", path: "/sessions/sid2/snapshot",
    reply: `{"turn":0,"window":${PAD6},"completion":[],"meaning":"PAD",` +
      '"toxic_score":null,"absorption":null,"intervention":[]}\n' },
];

function planJob(targetEnd: string): string {
  return '{"job":"j1","status":"done","result":{' +
    `"start":${PAD6},"target":["y","y","y","y"],` +
    '"inputs":["PAD","z","y","y"],' +
    `"trajectory":[["PAD","PAD","PAD","PAD","x","PAD"],["PAD","PAD","x","PAD","x","z"],` +
    `["x","PAD","x","z","x","y"],["x","z","x","y",${targetEnd}]],` +
    '"horizon":4,"method":"phi_u","minimal":true,"solutions":1},"error":null}';
}

function turnAndSnap(tok: string, window: string): Step[] {
  return [
    { method: "POST", path: "/sessions/sid2/turn", body: `{"tokens":["${tok}"]}`,
      reply: '{"schema":"1","reply":["x"],"steps":1,"snapshot":{}}' },
    { method: "GET", path: "/sessions/sid2/snapshot",
      reply: `{"turn":1,"window":${window},"completion":[],"meaning":"y",` +
        '"toxic_score":null,"absorption":null,"intervention":[]}\n' },
  ];
}

describe("what_if", () => {
  test("preview renders the plan without playing a single turn", async () => {
    const s = scripted([
      ...MODK_START,
      { method: "POST", path: "/analysis/synthesize",
        body: `{"model":"m1","start":${PAD6},"target":["y","y","y","y"]}`,
        reply: '{"job":"j1","status":"queued"}' },
      { method: "GET", path: "/jobs/j1", reply: planJob('"x","y"') },
    ]);
    const ui = new SteeringConsole(s.api);
    await ui.start("modk text");
    const out = await ui.whatIf(["y", "y", "y", "y"]);
    expect(out).toContain("inputs (4 turns");
    expect(out).toContain("PAD z y y");
    expect(ui.turnCount()).toBe(0); // nothing played
    s.done();
  });

  test("confirm plays the plan one input per turn and checks the end window", async () => {
    const end = '["x","z","x","y","x","y"]';
    const s = scripted([
      ...MODK_START,
      { method: "POST", path: "/analysis/synthesize",
        reply: '{"job":"j1","status":"queued"}' },
      { method: "GET", path: "/jobs/j1", reply: planJob('"x","y"') },
      ...turnAndSnap("PAD", '["PAD","PAD","PAD","PAD","x","PAD"]'),
      ...turnAndSnap("z", '["PAD","PAD","x","PAD","x","z"]'),
      ...turnAndSnap("y", '["x","PAD","x","z","x","y"]'),
      ...turnAndSnap("y", end),
    ]);
    const ui = new SteeringConsole(s.api);
    await ui.start("modk text");
    await ui.whatIf(["y", "y", "y", "y"]);
    const out = await ui.confirmPlan(["y", "y", "y", "y"]);
    expect(out).toBe("plan confirmed: final window x z x y x y matches the prediction");
    expect(ui.turnCount()).toBe(4);
    s.done();
  });

  test("a live window that misses the prediction reads as divergence", async () => {
    const s = scripted([
      ...MODK_START,
      { method: "POST", path: "/analysis/synthesize",
        reply: '{"job":"j1","status":"queued"}' },
      { method: "GET", path: "/jobs/j1", reply: planJob('"z","z"') }, // predicts ...z z
      ...turnAndSnap("PAD", '["PAD","PAD","PAD","PAD","x","PAD"]'),
      ...turnAndSnap("z", '["PAD","PAD","x","PAD","x","z"]'),
      ...turnAndSnap("y", '["x","PAD","x","z","x","y"]'),
      ...turnAndSnap("y", '["x","z","x","y","x","y"]'),
    ]);
    const ui = new SteeringConsole(s.api);
    await ui.start("modk text");
    await ui.whatIf(["y", "y", "y", "y"]);
    const out = await ui.confirmPlan(["y", "y", "y", "y"]);
    expect(out).toContain("plan DIVERGED");
    s.done();
  });

  test("synthesis failure banners the job error and blocks confirm", async () => {
    const s = scripted([
      ...MODK_START,
      { method: "POST", path: "/analysis/synthesize",
        reply: '{"job":"j2","status":"queued"}' },
      { method: "GET", path: "/jobs/j2",
        reply: '{"job":"j2","status":"error","result":null,' +
          '"error":{"code":"bijectivity","message":"bijectivity hypothesis violated"}}' },
    ]);
    const ui = new SteeringConsole(s.api);
    await ui.start("tab text");
    const out = await ui.whatIf(["y", "y", "y", "y"]);
    expect(out).toBe("analysis failed [bijectivity]: bijectivity hypothesis violated");
    const confirm = await ui.confirmPlan(["y", "y", "y", "y"]);
    expect(confirm).toContain("no previewed plan");
    expect(ui.turnCount()).toBe(0);
    s.done();
  });

  test("a deny mid-plan aborts the confirm", async () => {
    const s = scripted([
      ...MODK_START,
      { method: "POST", path: "/analysis/synthesize",
        reply: '{"job":"j1","status":"queued"}' },
      { method: "GET", path: "/jobs/j1", reply: planJob('"x","y"') },
      ...turnAndSnap("PAD", '["PAD","PAD","PAD","PAD","x","PAD"]'),
      { method: "POST", path: "/sessions/sid2/turn", body: '{"tokens":["z"]}',
        status: 403, reply: CENSOR },
    ]);
    const ui = new SteeringConsole(s.api);
    await ui.start("modk text");
    await ui.whatIf(["y", "y", "y", "y"]);
    const out = await ui.confirmPlan(["y", "y", "y", "y"]);
    expect(out).toContain("plan aborted at input z");
    expect(out).toContain("TURN DENIED");
    expect(ui.turnCount()).toBe(1); // only the admitted first input
    s.done();
  });
});

describe("certify", () => {
  test("renders the service verdicts", async () => {
    const s = scripted([
      ...MODK_START,
      { method: "POST", path: "/analysis/certify", body: '{"model":"m1","ell":4}',
        reply: '{"job":"j3","status":"queued"}' },
      { method: "GET", path: "/jobs/j3",
        reply: '{"job":"j3","status":"done","result":{' +
          '"thm1":{"property":"pivot-bijectivity","verdict":true,"coverage":"exhaustive","ell":4},' +
          '"thm2":{"property":"block-surjectivity","verdict":true,"coverage":"exhaustive","ell":4},' +
          '"controllable":true},"error":null}' },
    ]);
    const ui = new SteeringConsole(s.api);
    await ui.start("modk text");
    const out = await ui.runCertify(4);
    expect(out).toContain("pivot-bijectivity: pass");
    expect(out).toContain("controllable: true");
    s.done();
  });
});

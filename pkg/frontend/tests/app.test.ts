import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";
import { renderCounter, renderError, renderResult } from "../src/render.js";
import { GROUPS, stubService } from "./stub_service.js";

const BASE = "http://service.test";

function appWithStub(options?: Parameters<typeof stubService>[0]) {
  const stub = stubService(options);
  const app = new App(new ApiClient(BASE, stub.fetchFn));
  return { app, calls: stub.calls };
}

/** Script a four-stroke drawing: a body plus three dot taps. */
function drawFourStrokes(app: App): void {
  app.log.pointerDown(1, 40, 200, 0);
  app.log.pointerMove(1, 160, 240, 16);
  app.log.pointerMove(1, 280, 200, 32);
  app.log.pointerUp(1);
  for (const x of [120, 160, 200]) {
    app.log.pointerDown(1, x, 120, 100 + x);
    app.log.pointerUp(1);
  }
}

function someImage(): number[] {
  const image = new Array<number>(1024).fill(0);
  for (let i = 300; i < 360; i++) image[i] = 255;
  return image;
}

function renderedLabels(html: string): string[] {
  return [...html.matchAll(/data-label="([^"]+)"/g)].map((m) => m[1]);
}

describe("multi-mode end to end against the stub service", () => {
  it("a four-stroke drawing renders only group-4 labels", async () => {
    const { app } = appWithStub();
    await app.loadLabels();
    app.mode = "multi";
    drawFourStrokes(app);
    expect(app.log.count).toBe(4);

    await app.submit(someImage());

    expect(app.error).toBeNull();
    expect(app.response).not.toBeNull();
    expect(app.response!.group).toBe(4);
    expect(app.response!.model).toBe("group-4");

    const html = renderResult(app.response!, app.displayNames);
    const labels = renderedLabels(html);
    expect(labels).toHaveLength(2);
    for (const label of labels) {
      expect(GROUPS[4]).toContain(label);
    }
    // the headline label is one of the displayed group-4 names
    expect(html).toMatch(/Thaa' ث|Sheen ش/);
    expect(html).toContain("group 4");
    // nothing from outside the group leaks into the markup
    expect(html).not.toContain("alef");
    expect(html).not.toContain("Alif");
  });

  it("single mode renders all 29 probability bars", async () => {
    const { app } = appWithStub();
    await app.loadLabels();
    drawFourStrokes(app);
    await app.submit(someImage());
    expect(app.response!.group).toBeNull();
    const labels = renderedLabels(renderResult(app.response!, app.displayNames));
    expect(labels).toHaveLength(29);
  });

  it("unroutable stroke counts surface the fallback suggestion", async () => {
    const { app } = appWithStub();
    await app.loadLabels();
    app.mode = "multi";
    for (let i = 0; i < 9; i++) {
      app.log.pointerDown(1, 10 * i, 10, i);
      app.log.pointerUp(1);
    }
    await app.submit(someImage());
    expect(app.response).toBeNull();
    expect(app.error).toBe("stroke count 9 not supported - try single mode");
    expect(renderError(app.error!)).toContain("not supported");
  });
});

describe("submit lifecycle", () => {
  it("cannot submit an empty drawing", () => {
    const { app } = appWithStub();
    expect(app.canSubmit()).toBe(false);
  });

  it("allows at most one in-flight request", async () => {
    let release!: (r: Response) => void;
    const gate = new Promise<Response>((resolve) => { release = resolve; });
    let predictCalls = 0;
    const app = new App(new ApiClient(BASE, (url) => {
      if (new URL(url).pathname === "/v1/predict") {
        predictCalls += 1;
        return gate;
      }
      return Promise.reject(new Error("unexpected route"));
    }));
    drawFourStrokes(app);

    const first = app.submit(someImage());
    expect(app.pending).toBe(true);
    expect(app.canSubmit()).toBe(false);
    await app.submit(someImage()); // swallowed by the pending guard
    expect(predictCalls).toBe(1);

    release(new Response(JSON.stringify({
      label: "theh", label_index: 3, probabilities: { theh: 1 },
      group: 4, model: "group-4",
    }), { status: 200, headers: { "Content-Type": "application/json" } }));
    await first;
    expect(app.pending).toBe(false);
    expect(app.canSubmit()).toBe(true);
  });

  it("keeps the drawing when the service is down", async () => {
    const app = new App(new ApiClient(BASE, () =>
      Promise.reject(new TypeError("fetch failed"))));
    drawFourStrokes(app);
    await app.submit(someImage());
    expect(app.error).toContain("unreachable");
    expect(app.log.count).toBe(4); // input preserved for a retry
    expect(app.pending).toBe(false);
  });

  it("shows the service's own message for other errors", async () => {
    const { app } = appWithStub({
      failPredict: { status: 503, detail: "no model loaded" },
    });
    drawFourStrokes(app);
    await app.submit(someImage());
    expect(app.error).toBe("no model loaded");
  });

  it("a later successful submit clears the error", async () => {
    const { app } = appWithStub();
    await app.loadLabels();
    app.mode = "multi";
    for (let i = 0; i < 9; i++) {
      app.log.pointerDown(1, 10 * i, 10, i);
      app.log.pointerUp(1);
    }
    await app.submit(someImage());
    expect(app.error).not.toBeNull();
    app.mode = "single";
    await app.submit(someImage());
    expect(app.error).toBeNull();
    expect(app.response).not.toBeNull();
  });

  it("clear resets strokes, response, and error", async () => {
    const { app } = appWithStub();
    await app.loadLabels();
    drawFourStrokes(app);
    await app.submit(someImage());
    app.clear();
    expect(app.log.count).toBe(0);
    expect(app.response).toBeNull();
    expect(app.error).toBeNull();
    expect(app.canSubmit()).toBe(false);
  });
});

describe("renderers", () => {
  it("counter text is singular and plural", () => {
    expect(renderCounter(0)).toBe("0 strokes");
    expect(renderCounter(1)).toBe("1 stroke");
    expect(renderCounter(4)).toBe("4 strokes");
  });

  it("bars are sorted by probability, highest first", async () => {
    const { app } = appWithStub();
    await app.loadLabels();
    app.mode = "multi";
    drawFourStrokes(app);
    await app.submit(someImage());
    const html = renderResult(app.response!, app.displayNames);
    const labels = renderedLabels(html);
    const probs = app.response!.probabilities;
    expect(probs[labels[0]]).toBeGreaterThanOrEqual(probs[labels[1]]);
  });

  it("error markup escapes html", () => {
    expect(renderError("<script>")).not.toContain("<script>");
  });
});

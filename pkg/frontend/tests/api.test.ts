import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import type { FetchLike, ResponseLike } from "../src/api.js";

interface Call {
  url: string;
  method: string;
  body: unknown;
}

function recorder(status = 200, payload: unknown = {}) {
  const calls: Call[] = [];
  const fetchImpl: FetchLike = async (url, init) => {
    calls.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body) : undefined,
    });
    const response: ResponseLike = {
      ok: status < 400,
      status,
      text: async () =>
        typeof payload === "string" ? payload : JSON.stringify(payload),
    };
    return response;
  };
  return { calls, fetchImpl };
}

describe("ApiClient", () => {
  it("builds session endpoints under the base path", async () => {
    const { calls, fetchImpl } = recorder(200, { session_id: "s0" });
    const api = new ApiClient("/api/v1", fetchImpl);
    await api.createSession();
    await api.getSession("s0");
    expect(calls[0]).toMatchObject({ url: "/api/v1/sessions", method: "POST" });
    expect(calls[1]).toMatchObject({ url: "/api/v1/sessions/s0", method: "GET" });
  });

  it("sends search predicates and limits verbatim", async () => {
    const { calls, fetchImpl } = recorder(200, { results: [], staging: [], cypher: null });
    const api = new ApiClient("/api/v1", fetchImpl);
    await api.search("s0", {
      predicate: { op: "has", attribute: "year" },
      limit: 100,
    });
    expect(calls[0].url).toBe("/api/v1/sessions/s0/search");
    expect(calls[0].body).toEqual({
      predicate: { op: "has", attribute: "year" },
      limit: 100,
    });
  });

  it("shapes refine requests by mode", async () => {
    const { calls, fetchImpl } = recorder(200, { future: [], cypher: null, nodes: {} });
    const api = new ApiClient("/api/v1", fetchImpl);
    await api.refineTopK("s0", "citation_count", 3, "desc");
    await api.refineBuckets("s0", "year", ["2023"], "tok");
    expect(calls[0].body).toEqual({
      mode: "top_k",
      params: { attribute: "citation_count", k: 3, direction: "desc" },
    });
    expect(calls[1].body).toEqual({
      mode: "bucket",
      params: { attribute: "year", bucket: ["2023"], token: "tok" },
    });
  });

  it("passes bucket-filter fields through", async () => {
    const { calls, fetchImpl } = recorder(200, { future: [], cypher: null, nodes: {} });
    const api = new ApiClient("/api/v1", fetchImpl);
    await api.bucketFilter("s0", "year", "2023", "tok");
    expect(calls[0].body).toEqual({ attribute: "year", bucket: "2023", token: "tok" });
  });

  it("omits edit keys the caller did not set", async () => {
    const { calls, fetchImpl } = recorder(200, { stage: "x", intent: {} });
    const api = new ApiClient("/api/v1", fetchImpl);
    await api.confirmIntent("s0", { dimensions: ["Challenge"] });
    expect(calls[0].body).toEqual({ dimensions: ["Challenge"] });
    await api.confirmMindmap("s0");
    expect(calls[1].body).toEqual({});
  });

  it("turns error envelopes into ApiError", async () => {
    const { fetchImpl } = recorder(404, {
      code: "unknown_session",
      message: "no session nope",
    });
    const api = new ApiClient("/api/v1", fetchImpl);
    const err = await api.getSession("nope").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).code).toBe("unknown_session");
    expect((err as ApiError).status).toBe(404);
  });

  it("keeps non-JSON error bodies readable", async () => {
    const { fetchImpl } = recorder(502, "bad gateway");
    const api = new ApiClient("/api/v1", fetchImpl);
    const err = await api.getSession("s0").catch((e: unknown) => e);
    expect((err as ApiError).code).toBe("internal");
    expect((err as ApiError).message).toContain("bad gateway");
  });

  it("maps network failures to an unreachable error", async () => {
    const api = new ApiClient("/api/v1", async () => {
      throw new TypeError("fetch failed");
    });
    const err = await api.getSession("s0").catch((e: unknown) => e);
    expect((err as ApiError).code).toBe("unreachable");
    expect((err as ApiError).status).toBe(0);
  });

  it("downloads report text and exposes direct URLs", async () => {
    const { calls, fetchImpl } = recorder(200, "\\section{Introduction}");
    const api = new ApiClient("/api/v1", fetchImpl);
    expect(api.downloadUrl("s0", "latex")).toBe(
      "/api/v1/sessions/s0/report/download?format=latex",
    );
    const text = await api.download("s0", "latex");
    expect(text).toContain("\\section");
    expect(calls[0].method).toBe("GET");
  });
});

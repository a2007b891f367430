import { afterEach, describe, expect, it, vi } from "vitest";

import { Client, ConceptInfo } from "./api.js";
import {
  buildForm,
  missingRequired,
  refreshRequired,
  setFieldValue,
  toCreatePayload,
} from "./forms.js";

const employee: ConceptInfo = {
  id: 5,
  name: "Employee",
  attributes: [
    { name: "name", type: "text", required: true },
    { name: "hire_date", type: "date", required: true },
    { name: "citizenship", type: "text", required: false },
    { name: "visa_no", type: "text", required: false },
    { name: "dept", type: "reference(OrgUnit)", required: false },
  ],
  defined_at: 1,
  origin_pack: "Personal Data",
  builtin: false,
};

function clientAnsweringMandatory() {
  const calls: string[] = [];
  vi.stubGlobal("fetch", vi.fn(async (url: string) => {
    calls.push(url);
    const required = ["name", "hire_date"];
    if (url.includes("citizenship=foreign")) required.push("visa_no");
    return {
      ok: true,
      status: 200,
      json: async () => ({ state: 42, concept: "Employee", required }),
    } as Response;
  }));
  return { client: new Client(""), calls };
}

afterEach(() => vi.unstubAllGlobals());

describe("entry forms", () => {
  it("takes required markers from the API, not the schema", async () => {
    const { client } = clientAnsweringMandatory();
    const form = await buildForm(client, employee);
    const required = form.fields.filter((f) => f.required).map((f) => f.name);
    expect(required.sort()).toEqual(["hire_date", "name"]);
    expect(form.state).toBe(42);
  });

  it("re-queries on field change and moves the markers", async () => {
    const { client, calls } = clientAnsweringMandatory();
    const form = await buildForm(client, employee);
    const before = calls.length;
    const changed = await setFieldValue(client, form, "citizenship", "foreign");
    expect(calls.length).toBe(before + 1);
    expect(changed).toEqual(["visa_no"]);
    expect(form.fields.find((f) => f.name === "visa_no")!.required).toBe(true);
    const back = await setFieldValue(client, form, "citizenship", "domestic");
    expect(back).toEqual(["visa_no"]);
    expect(form.fields.find((f) => f.name === "visa_no")!.required).toBe(false);
  });

  it("reports required fields the draft leaves empty", async () => {
    const { client } = clientAnsweringMandatory();
    const form = await buildForm(client, employee);
    expect(missingRequired(form).sort()).toEqual(["hire_date", "name"]);
    await setFieldValue(client, form, "name", "Ivanov");
    expect(missingRequired(form)).toEqual(["hire_date"]);
  });

  it("coerces typed values into the create payload", async () => {
    const { client } = clientAnsweringMandatory();
    const form = await buildForm(client, employee);
    await setFieldValue(client, form, "name", "Ivanov");
    await setFieldValue(client, form, "hire_date", "2001-02-03");
    await setFieldValue(client, form, "dept", "17");
    const payload = toCreatePayload(form);
    expect(payload).toEqual({
      concept: "Employee",
      values: { name: "Ivanov", hire_date: "2001-02-03", dept: 17 },
    });
  });

  it("never marks a field required without an API answer saying so", async () => {
    // /mandatory returns an empty set: even schema-required fields stay unmarked
    vi.stubGlobal("fetch", vi.fn(async () => ({
      ok: true, status: 200,
      json: async () => ({ state: 1, concept: "Employee", required: [] }),
    } as Response)));
    const form = await buildForm(new Client(""), employee);
    expect(form.fields.every((f) => !f.required)).toBe(true);
    expect(missingRequired(form)).toEqual([]);
  });

  it("propagates the state the required set was computed at", async () => {
    const { client } = clientAnsweringMandatory();
    const form = await buildForm(client, employee);
    await refreshRequired(client, form);
    expect(form.state).toBe(42);
  });
});

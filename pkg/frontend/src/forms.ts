// Dynamic entry forms. Required markers are never computed here: they come
// from GET /mandatory for the current draft and are refreshed whenever a
// field changes, so conditional requirements (foreign citizenship needing a
// visa number, and anything administrators add later) appear live.

import { AttributeInfo, Client, ConceptInfo } from "./api.js";

export interface FormField {
  name: string;
  type: string;
  required: boolean; // mirror of the latest /mandatory answer
}

export interface FormModel {
  concept: string;
  fields: FormField[];
  values: Record<string, unknown>;
  state: number; // head state the required set was computed at
}

export async function buildForm(client: Client, concept: ConceptInfo): Promise<FormModel> {
  const model: FormModel = {
    concept: concept.name,
    fields: concept.attributes.map((a: AttributeInfo) => ({
      name: a.name,
      type: a.type,
      required: false,
    })),
    values: {},
    state: 0,
  };
  await refreshRequired(client, model);
  return model;
}

export function draftValues(model: FormModel): Record<string, unknown> {
  const out: Record<string, unknown> = {};
  for (const [k, v] of Object.entries(model.values)) {
    if (v !== undefined && v !== null && v !== "") out[k] = v;
  }
  return out;
}

/** Re-query /mandatory for the current draft; returns field names whose
 * required marker changed. */
export async function refreshRequired(client: Client, model: FormModel): Promise<string[]> {
  const answer = await client.mandatory(model.concept, draftValues(model));
  const required = new Set(answer.required);
  const changed: string[] = [];
  for (const field of model.fields) {
    const now = required.has(field.name);
    if (now !== field.required) changed.push(field.name);
    field.required = now;
  }
  model.state = answer.state;
  return changed;
}

export async function setFieldValue(
  client: Client,
  model: FormModel,
  name: string,
  value: unknown,
): Promise<string[]> {
  model.values[name] = value;
  return refreshRequired(client, model);
}

/** Names of required fields the draft leaves empty, per the API's answer. */
export function missingRequired(model: FormModel): string[] {
  return model.fields
    .filter((f) => f.required)
    .map((f) => f.name)
    .filter((name) => {
      const v = model.values[name];
      return v === undefined || v === null || v === "";
    });
}

function coerce(field: FormField, raw: unknown): unknown {
  if (raw === undefined || raw === null || raw === "") return undefined;
  if (field.type === "integer" || field.type.startsWith("reference")) {
    return Number.parseInt(String(raw), 10);
  }
  if (field.type === "decimal") return Number.parseFloat(String(raw));
  if (field.type === "boolean") return raw === true || raw === "true";
  return raw;
}

export function toCreatePayload(model: FormModel): Record<string, unknown> {
  const values: Record<string, unknown> = {};
  for (const field of model.fields) {
    const v = coerce(field, model.values[field.name]);
    if (v !== undefined) values[field.name] = v;
  }
  return { concept: model.concept, values };
}

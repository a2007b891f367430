// What-if exploration: unit scores under overridden appraisal weights and
// hypothetical employee moves. Strictly read-only — the scenario is sent to
// the appraisal endpoint, never to the event log, and the head state is
// checked before and after so any accidental write would surface.

import { AppraisalParams, Client, UnitScore } from "./api.js";

export interface WhatIfScenario {
  params?: AppraisalParams;
  moves: Array<[number, number]>; // employee -> position
}

export interface WhatIfResult {
  rows: Array<UnitScore & { baseline: number; delta: number }>;
  state: number;
  headBefore: number;
  headAfter: number;
}

export async function exploreWhatIf(
  client: Client,
  scenario: WhatIfScenario,
): Promise<WhatIfResult> {
  const headBefore = (await client.head()).state;
  const baseline = await client.appraiseAll(scenario.params);
  const overlay = scenario.moves.length
    ? await client.appraiseAll(scenario.params, scenario.moves)
    : baseline;
  const headAfter = (await client.head()).state;
  const base = new Map(baseline.units.map((u) => [u.unit, u.value]));
  const rows = overlay.units.map((u) => ({
    ...u,
    baseline: base.get(u.unit) ?? u.value,
    delta: u.value - (base.get(u.unit) ?? u.value),
  }));
  return { rows, state: overlay.state, headBefore, headAfter };
}

/** DOM rendering. Every chip and counter is copied from the server
 *  snapshot; nothing is derived client-side. */

import { ViewState } from "./state.js";

function el(
  tag: string,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElement {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

export function renderBanner(state: ViewState): HTMLElement {
  const banner = el("div", { class: "banner", "data-testid": "banner" });
  if (state.strategy) {
    banner.appendChild(
      el("span", { class: "strategy" }, `strategy ${state.strategy}`),
    );
  }
  if (state.snapshot) {
    const s = state.snapshot;
    banner.appendChild(
      el(
        "span",
        { class: "progress", "data-testid": "progress" },
        `${s.resolved_count}/${s.total} resolved, ${s.tests_used} tests used`,
      ),
    );
    if (s.complete) {
      banner.appendChild(el("span", { class: "done" }, "session complete"));
    }
  }
  return banner;
}

export function renderInstructionPanel(
  state: ViewState,
  onOutcome: (o: "+" | "-") => void,
): HTMLElement {
  const panel = el("div", { class: "panel", "data-testid": "instruction" });
  const instr = state.instruction;
  if (state.staleInstruction) {
    panel.appendChild(
      el(
        "div",
        { class: "stale", "data-testid": "stale" },
        "Instruction was already answered; view refreshed.",
      ),
    );
  }
  if (!instr) {
    panel.appendChild(
      el(
        "div",
        { class: "idle" },
        state.snapshot?.complete ? "All individuals resolved." : "Loading...",
      ),
    );
    return panel;
  }
  panel.appendChild(el("div", { class: "note" }, instr.step_note));
  const list = el("ul", { class: "pool", "data-testid": "pool" });
  instr.pool.forEach((id) => list.appendChild(el("li", {}, id)));
  panel.appendChild(list);
  const actions = el("div", { class: "actions" });
  for (const [label, outcome] of [
    ["Positive", "+"],
    ["Negative", "-"],
  ] as const) {
    const btn = el(
      "button",
      { "data-testid": `outcome-${outcome}` },
      label,
    ) as HTMLButtonElement;
    btn.disabled = state.submitting;
    btn.addEventListener("click", () => onOutcome(outcome));
    actions.appendChild(btn);
  }
  panel.appendChild(actions);
  return panel;
}

export function renderStatusBoard(state: ViewState): HTMLElement {
  const board = el("div", { class: "board", "data-testid": "board" });
  for (const chip of state.snapshot?.roster ?? []) {
    const item = el("div", {
      class: `chip status-${chip.status}`,
      "data-testid": `chip-${chip.id}`,
      "data-status": chip.status,
    });
    item.appendChild(el("span", { class: "id" }, chip.id));
    item.appendChild(el("span", { class: "status" }, chip.status));
    if (chip.urgent) {
      item.appendChild(el("span", { class: "badge urgent" }, "urgent"));
    }
    if (chip.guaranteed_slot) {
      item.appendChild(
        el("span", { class: "badge guaranteed" }, "guaranteed this round"),
      );
    }
    if (chip.repooled > 0) {
      item.appendChild(
        el(
          "span",
          { class: "badge repooled", "data-testid": `repooled-${chip.id}` },
          `re-pooled ×${chip.repooled}`,
        ),
      );
    }
    board.appendChild(item);
  }
  return board;
}

export function renderErrors(state: ViewState): HTMLElement {
  const box = el("div", { class: "errors", "data-testid": "errors" });
  if (state.error) box.appendChild(el("div", { class: "error" }, state.error));
  return box;
}

export function renderApp(
  root: HTMLElement,
  state: ViewState,
  onOutcome: (o: "+" | "-") => void,
): void {
  root.replaceChildren(
    renderBanner(state),
    renderErrors(state),
    renderInstructionPanel(state, onOutcome),
    renderStatusBoard(state),
  );
}

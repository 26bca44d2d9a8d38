/** App entry point: new-session form plus the live session view. */

import { SessionApi } from "./api.js";
import { parseRoster, SessionController } from "./state.js";
import { renderApp } from "./ui.js";

export function boot(root: HTMLElement, api = new SessionApi()): SessionController {
  const controller = new SessionController(api, (state) => {
    renderApp(view, state, (o) => void controller.submit(o));
  });

  const form = document.createElement("form");
  form.setAttribute("data-testid", "new-session");
  form.innerHTML = `
    <label>risk x <input name="x" type="number" step="0.01" min="0" max="1" required></label>
    <label>risk y (optional) <input name="y" type="number" step="0.01" min="0" max="1"></label>
    <label>strategy pin (optional) <input name="strategy" type="text"></label>
    <label>roster (one id per line, "!" = urgent, ":stratum" allowed)
      <textarea name="roster" rows="6" required></textarea></label>
    <button type="submit">Start session</button>
  `;
  const view = document.createElement("div");
  view.setAttribute("data-testid", "session-view");
  root.replaceChildren(form, view);

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const data = new FormData(form);
    const x = Number(data.get("x"));
    const yRaw = String(data.get("y") ?? "").trim();
    const risk = yRaw ? { x, y: Number(yRaw) } : { x };
    const roster = parseRoster(String(data.get("roster") ?? ""));
    const strategy = String(data.get("strategy") ?? "").trim() || undefined;
    void controller.createSession(risk, roster, strategy);
  });

  return controller;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot(document.getElementById("app") as HTMLElement);
}

/** Browser entry point: wires the controller to the page. */

import { ServiceClient } from "./api.js";
import { ScenarioController } from "./controller.js";
import { renderExplainView } from "./views/explain.js";
import { renderForecastView } from "./views/forecast.js";
import { renderInterventionView } from "./views/intervention.js";
import type { ScenarioState } from "./types.js";

function serviceUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("service") ?? "http://127.0.0.1:8000";
}

function renderAll(state: ScenarioState): void {
  const mount = (id: string, html: string) => {
    const el = document.getElementById(id);
    if (el) el.innerHTML = html;
  };
  mount("forecast-root", renderForecastView(state));
  mount("intervention-root", renderInterventionView(state));
  mount("explain-root", renderExplainView(state));
}

export function start(): ScenarioController {
  const api = new ServiceClient(serviceUrl());
  const controller = new ScenarioController(api, renderAll);

  document.addEventListener("input", (event) => {
    const target = event.target as HTMLInputElement;
    if (target?.id === "level-slider") {
      void controller.setInterventionLevel(Number(target.value));
    }
  });
  document.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target?.dataset?.head !== undefined) {
      controller.selectHead(Number(target.dataset.head));
    }
    if (target?.id === "forecast-button") {
      const series = (document.getElementById("series-input") as HTMLInputElement)?.value ?? "0";
      controller.selectWindow(Number(series), null);
      void controller.refreshForecast().then(() => controller.refreshExplanation());
    }
  });

  void controller.init().then(() => controller.refreshForecast());
  return controller;
}

if (typeof document !== "undefined" && document.getElementById("forecast-root")) {
  start();
}

/** DOM wiring for the scoring page. State lives in ScoringSession; this file
 * only renders the current view and forwards clicks. */

import { createApiClient } from "./api";
import { renderHistogram } from "./histogram";
import { getRaterId } from "./session";
import { ScoringSession } from "./state";
import { ALL_SCORES, type Score } from "./types";

const GUIDANCE = [
  "Walls: are they solid and pleasant to look at?",
  "Roof: is the structure sound, with any local character?",
  "Doors and windows: are they well made and in good shape?",
  "Extras: balconies, steps, canopies, ramps or chimneys present?",
  "Facilities: air conditioning, parking or similar equipment visible?",
  "Overall: would you want to live in this house?",
];

const api = createApiClient("");
const session = new ScoringSession(api, getRaterId());

const app = document.getElementById("app")!;

function el(tag: string, attrs: Record<string, string> = {}, text = ""): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text) {
    node.textContent = text;
  }
  return node;
}

async function showHistogram(imageId: string, container: HTMLElement): Promise<void> {
  try {
    const dist = await api.distribution(imageId);
    container.innerHTML = renderHistogram(dist);
  } catch {
    container.textContent = "no ballots yet for this image";
  }
}

function render(): void {
  const view = session.view;
  app.innerHTML = "";

  const header = el("header");
  header.append(el("h1", {}, "Rate this house"));
  header.append(el("p", { class: "progress" }, `you have scored ${session.completed} images`));
  app.append(header);

  if (view.kind === "loading") {
    app.append(el("p", { class: "status" }, "loading the next image..."));
    return;
  }

  if (view.kind === "done") {
    const doneBox = el("section", { class: "done" });
    doneBox.append(el("h2", {}, "All done!"));
    doneBox.append(
      el("p", {}, `You scored every available image. Session total: ${view.completed}.`),
    );
    app.append(doneBox);
    return;
  }

  if (view.kind === "failed") {
    const banner = el("section", { class: "banner" });
    banner.append(el("p", {}, `Connection trouble: ${view.message}`));
    const retryBtn = el("button", { class: "retry" }, "Retry") as HTMLButtonElement;
    retryBtn.addEventListener("click", () => void session.retry().then(render));
    banner.append(retryBtn);
    app.append(banner);
    return;
  }

  // scoring view
  const figure = el("figure", { class: "house" });
  const img = el("img", {
    src: api.imageUrl(view.image.pixels_url),
    alt: `house image ${view.image.image_id}`,
  });
  figure.append(img);
  figure.append(
    el("figcaption", {}, `${view.image.image_id} · ${view.image.n_ballots} ballots so far`),
  );
  app.append(figure);

  const guidance = el("details", { class: "guidance", open: "" });
  guidance.append(el("summary", {}, "What to look for"));
  const list = el("ul");
  for (const item of GUIDANCE) {
    list.append(el("li", {}, item));
  }
  guidance.append(list);
  app.append(guidance);

  const scoreRow = el("div", { class: "scores", role: "group", "aria-label": "score 1 to 10" });
  for (const score of ALL_SCORES) {
    const btn = el(
      "button",
      {
        class: "score" + (view.selected === score ? " selected" : ""),
        "aria-pressed": String(view.selected === score),
        "data-score": String(score),
      },
      String(score),
    ) as HTMLButtonElement;
    btn.disabled = view.inFlight;
    btn.addEventListener("click", () => {
      session.selectScore(score as Score);
      render();
    });
    scoreRow.append(btn);
  }
  app.append(scoreRow);
  app.append(el("p", { class: "hint" }, "1 = very poor quality, 10 = excellent quality"));

  if (view.notice) {
    app.append(el("p", { class: "notice" }, view.notice));
  }

  const submit = el("button", { class: "submit" }, view.inFlight ? "Submitting..." : "Submit score") as HTMLButtonElement;
  submit.disabled = !session.canSubmit;
  const scoredId = view.image.image_id;
  submit.addEventListener("click", () => {
    if (!session.canSubmit) {
      return;
    }
    render(); // repaint disabled controls while in flight
    void session.submitScore().then(() => {
      render();
      const pane = document.getElementById("histogram-pane");
      if (pane) {
        void showHistogram(scoredId, pane);
      }
    });
  });
  app.append(submit);

  const histoBox = el("section", { class: "histogram" });
  histoBox.append(el("h2", {}, "Crowd view of your last image"));
  histoBox.append(el("div", { id: "histogram-pane" }));
  app.append(histoBox);
}

void session.loadNext().then(render);

// DOM rendering of the three-column board. All state decisions live in
// store.ts / board.ts; this file only paints and wires events.

import { isEmpty } from "./board.js";
import { formatDelta, formatFactors, formatScore, formatSnooze } from "./format.js";
import { DashboardStore } from "./store.js";
import type { CardViewModel, Column } from "./types.js";
import { COLUMNS, COLUMN_LABELS } from "./types.js";

function cardElement(
  card: CardViewModel,
  clockHour: number,
  store: DashboardStore,
  repaint: () => void,
): HTMLElement {
  const el = document.createElement("div");
  el.className = `card${card.flipped ? " flipped" : ""}`;
  el.draggable = true;
  el.dataset.patientId = card.patientId;

  if (card.flipped) {
    const list = formatFactors(card)
      .map((line) => `<li>${line}</li>`)
      .join("");
    el.innerHTML = `<div class="pid">${card.patientId}</div><ul>${list}</ul>`;
  } else {
    const snooze =
      card.snoozeUntil !== null
        ? `<div class="snooze">${formatSnooze(card, clockHour)}</div>`
        : "";
    el.innerHTML =
      `<div class="pid">${card.patientId}</div>` +
      `<div class="score">${formatScore(card.riskScore)}</div>` +
      `<div class="delta">${formatDelta(card.deltaLastHour)}</div>` +
      snooze;
  }

  el.addEventListener("click", () => {
    store.flip(card.patientId);
    repaint();
  });
  el.addEventListener("dragstart", (ev) => {
    ev.dataTransfer?.setData("text/plain", card.patientId);
  });
  return el;
}

export function renderBoard(
  root: HTMLElement,
  store: DashboardStore,
  banner: string | null,
): void {
  const board = store.board();
  root.innerHTML = "";

  if (banner) {
    const note = document.createElement("div");
    note.className = "banner";
    note.textContent = banner;
    root.appendChild(note);
  }

  if (isEmpty(board)) {
    const empty = document.createElement("div");
    empty.className = "empty";
    empty.textContent = "No patients are being scored yet.";
    root.appendChild(empty);
    return;
  }

  const repaint = () => renderBoard(root, store, banner);
  for (const column of COLUMNS) {
    const col = document.createElement("section");
    col.className = "column";
    col.dataset.column = column;
    col.innerHTML = `<h2>${COLUMN_LABELS[column]}</h2>`;
    col.addEventListener("dragover", (ev) => ev.preventDefault());
    col.addEventListener("drop", (ev) => {
      ev.preventDefault();
      const pid = ev.dataTransfer?.getData("text/plain");
      if (!pid) return;
      const hours =
        column === "snoozed"
          ? Number(window.prompt("Snooze for how many hours?", "2") ?? "0")
          : undefined;
      void store.dragCard(pid, column as Column, hours).then(repaint);
    });
    for (const card of board[column]) {
      col.appendChild(cardElement(card, store.clockHour, store, repaint));
    }
    root.appendChild(col);
  }
}

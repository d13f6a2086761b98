// Page wiring. Everything stateful lives in FormState / loadTrend; this
// file only moves values between those and the DOM.

import { ApiClient } from './api.js';
import { FormState } from './form.js';
import { LEVEL_LABELS, OPTIONS, QUESTIONS, QUESTION_STEM } from './scoring.js';
import { loadToken, saveToken } from './storage.js';
import { loadTrend, renderTrendSvg } from './trend.js';

const baseUrl = window.location.origin;
const form = new FormState();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

function client(): ApiClient | null {
  const token = loadToken(window.localStorage);
  return token === null ? null : new ApiClient(baseUrl, token);
}

function renderTokenGate(): void {
  const gate = el<HTMLDivElement>('token-gate');
  const main = el<HTMLDivElement>('main-ui');
  const have = loadToken(window.localStorage) !== null;
  gate.hidden = have;
  main.hidden = !have;
}

function buildQuestions(): void {
  const host = el<HTMLDivElement>('questions');
  QUESTIONS.forEach((question, qi) => {
    const fieldset = document.createElement('fieldset');
    const legend = document.createElement('legend');
    legend.textContent = `${qi + 1}. ${QUESTION_STEM} ${question}`;
    fieldset.appendChild(legend);
    for (const option of OPTIONS) {
      const label = document.createElement('label');
      const radio = document.createElement('input');
      radio.type = 'radio';
      radio.name = `q${qi}`;
      radio.value = String(option.value);
      radio.addEventListener('change', () => {
        form.setAnswer(qi, option.value);
        syncControls();
      });
      label.appendChild(radio);
      label.appendChild(document.createTextNode(` ${option.label}`));
      fieldset.appendChild(label);
    }
    host.appendChild(fieldset);
  });
}

function syncControls(): void {
  const submit = el<HTMLButtonElement>('submit');
  submit.disabled = !form.canSubmit;
  const preview = form.previewScore();
  el<HTMLSpanElement>('preview').textContent =
    preview === null ? 'answer all questions to see a preview' : `preview: ${preview}`;
  const banner = el<HTMLDivElement>('retry-banner');
  banner.hidden = form.status !== 'failed';
  if (form.lastError !== null) el<HTMLSpanElement>('error-text').textContent = form.lastError;
}

async function submitNow(): Promise<void> {
  const api = client();
  if (api === null) return;
  syncControls();
  const result = await form.submit(api, Date.now());
  syncControls();
  if (result !== null) {
    el<HTMLDivElement>('result').textContent =
      `Today's score: ${result.score} (${LEVEL_LABELS[result.level]})`;
    await refreshTrend();
  }
}

async function refreshTrend(): Promise<void> {
  const api = client();
  if (api === null) return;
  const view = await loadTrend(api, window.localStorage, () => new Date());
  el<HTMLDivElement>('chart').innerHTML = view.points.length > 0 ? renderTrendSvg(view.points) : '';
  const notice = el<HTMLDivElement>('trend-notice');
  notice.textContent = view.notice ?? '';
  notice.classList.toggle('stale', view.stale);
}

window.addEventListener('DOMContentLoaded', () => {
  buildQuestions();
  syncControls();
  renderTokenGate();

  el<HTMLButtonElement>('save-token').addEventListener('click', () => {
    const input = el<HTMLInputElement>('token-input');
    const value = input.value.trim();
    if (value === '') return;
    saveToken(window.localStorage, value);
    renderTokenGate();
    void refreshTrend();
  });

  el<HTMLButtonElement>('submit').addEventListener('click', () => void submitNow());
  el<HTMLButtonElement>('retry').addEventListener('click', () => void submitNow());

  if (loadToken(window.localStorage) !== null) void refreshTrend();
});

import { ApiClient } from './api.js';
import { createChatApp } from './ui.js';

function serviceBaseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get('service');
  if (fromQuery) {
    window.localStorage.setItem('ukil-service-url', fromQuery);
    return fromQuery;
  }
  return window.localStorage.getItem('ukil-service-url') ?? 'http://127.0.0.1:8080';
}

const root = document.getElementById('app');
if (!root) throw new Error('missing #app mount point');

const client = new ApiClient(serviceBaseUrl());
const app = createChatApp(root, client);

void app.refreshHealth();
void app.loadCasePresets();
window.setInterval(() => { void app.refreshHealth(); }, 10_000);

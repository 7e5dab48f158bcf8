// Entry point: route ?view=review&mission=... or ?view=play&name=...;
// anything else shows the mission picker.

import { ReviewApi } from "./api.js";
import { PlayView } from "./play.js";
import { ReviewView } from "./review.js";

async function landing(root: HTMLElement, api: ReviewApi): Promise<void> {
  root.innerHTML = `
    <div class="landing">
      <h1>cobuild</h1>
      <section>
        <h2>Live play</h2>
        <form id="play-form">
          <input id="player-name" placeholder="your name" value="player">
          <input id="server-url" value="ws://${location.hostname}:8400/play">
          <button>Join</button>
        </form>
      </section>
      <section>
        <h2>After-action review</h2>
        <ul id="mission-list"><li>loading…</li></ul>
      </section>
    </div>`;
  const form = root.querySelector<HTMLFormElement>("#play-form")!;
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const name = root.querySelector<HTMLInputElement>("#player-name")!.value || "player";
    const server = root.querySelector<HTMLInputElement>("#server-url")!.value;
    location.search = `?view=play&name=${encodeURIComponent(name)}&server=${encodeURIComponent(server)}`;
  });
  const list = root.querySelector<HTMLElement>("#mission-list")!;
  try {
    const missions = await api.listMissions();
    list.innerHTML = "";
    for (const mission of missions) {
      const item = document.createElement("li");
      const link = document.createElement("a");
      link.href = `?view=review&mission=${encodeURIComponent(mission.id)}`;
      link.textContent = `${mission.id} — ${mission.status} (${mission.events} events)`;
      item.append(link);
      list.append(item);
    }
    if (!missions.length) list.innerHTML = "<li>no recorded missions yet</li>";
  } catch (error) {
    list.innerHTML = `<li>review service unreachable: ${String(error)}</li>`;
  }
}

export async function boot(root: HTMLElement): Promise<void> {
  const params = new URLSearchParams(location.search);
  const apiBase = params.get("api") ?? `http://${location.hostname}:8500`;
  const api = new ReviewApi(apiBase);
  const view = params.get("view");
  if (view === "review" && params.get("mission")) {
    const review = new ReviewView(root, api, params.get("mission")!);
    try {
      await review.init();
    } catch (error) {
      root.innerHTML = `<div class="banner-error">review service unreachable: ${String(error)}</div>`;
    }
  } else if (view === "play") {
    const server = params.get("server") ?? `ws://${location.hostname}:8400/play`;
    new PlayView(root, params.get("name") ?? "player", server);
  } else {
    await landing(root, api);
  }
}

const mount = document.getElementById("app");
if (mount) void boot(mount);

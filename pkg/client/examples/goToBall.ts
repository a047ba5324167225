/**
 * Scripted heuristic agent: steer toward the ball using the per-step task
 * debug info (bearing/distance), kick in range. Run against a live server:
 *
 *    node dist/examples/goToBall.js [host] [port]
 */
import { RemoteEnv } from "../src/client";

interface AgentDebug {
  bearing: number;   // radians, positive = target on the left
  distance: number;
}

export function policyFromDebug(debug: AgentDebug): Float32Array {
  const action = new Float32Array(6);
  const turn = Math.max(-3, Math.min(3, -debug.bearing * 6));
  action[0] = debug.distance < 1.0 ? 0.0 : Math.abs(debug.bearing) < 0.6 ? 1.2 : 0.2;
  action[1] = turn;
  action[2] = debug.distance < 1.7 && Math.abs(debug.bearing) < 0.5 ? 1.0 : 0.0;
  return action;
}

export async function runEpisode(host: string, port: number, seed: number, steps = 300) {
  const env = await RemoteEnv.connect(host, port, {
    task: "kick_the_ball",
    sensors: "proprio",
    seed,
  });
  try {
    let result = await env.reset(seed);
    let total = 0;
    for (let i = 0; i < steps && !result.done; i++) {
      const task = result.info["task"] as { agents: AgentDebug[] } | undefined;
      const debug = task?.agents?.[0] ?? { bearing: 0, distance: 10 };
      result = await env.step([policyFromDebug(debug)]);
      total += result.rewards[0];
    }
    return total;
  } finally {
    env.close();
  }
}

if (require.main === module) {
  const host = process.argv[2] ?? "127.0.0.1";
  const port = Number(process.argv[3] ?? 7777);
  runEpisode(host, port, 1).then(
    (total) => console.log(`episode return: ${total.toFixed(3)}`),
    (err) => {
      console.error(err);
      process.exit(1);
    },
  );
}

#!/usr/bin/env python3
"""Regenerates full_run.script and search.json for the gantry-crane run.

Usage: python3 fixtures/make_fixtures.py
"""
import json
from pathlib import Path

HERE = Path(__file__).resolve().parent

PM = "ProjectManager"
ME = "MechanicalEngineer"
CSE = "ControlSystemsEngineer"
SE = "SafetyEngineer"
TRIZ = "TRIZSpecialist"
OS = "OperationsSpecialist"
DOC = "DocumentationSpecialist"

SEARCH = {
    "gantry crane main components trolley hoist girder": [
        {"url": "https://example.org/cranes/gantry-anatomy",
         "content": "A gantry crane consists of two or more legs running on rails, a main girder spanning the legs, a trolley travelling along the girder and a hoist with wire rope and hook block that lifts the load."},
        {"url": "https://example.org/cranes/drive-systems",
         "content": "Travel and traverse motions are driven by electric motors through gearboxes; brakes hold the trolley and bridge at rest."},
    ],
    "gantry crane function analysis components functions": [
        {"url": "https://example.org/triz/function-analysis-crane",
         "content": "Function analysis lists interactions such as rope holds load, trolley moves rope, motor drives trolley, brake stops trolley, and marks harmful ones like load swing damaging surroundings."},
    ],
    "gantry crane drive control speed profile sway": [
        {"url": "https://example.org/control/crane-speed-profiles",
         "content": "Abrupt acceleration and deceleration of the trolley excite pendulum motion of the suspended load; S-curve speed profiles reduce residual sway."},
    ],
    "gantry crane hazards swinging load overload": [
        {"url": "https://example.org/safety/crane-hazards",
         "content": "Swinging loads strike workers and structures; overloading leads to structural fatigue, brake overheating and emergency stops."},
    ],
    "control systems for gantry cranes excessive swinging overheating": [
        {"url": "https://example.org/journals/anti-sway-control",
         "content": "Various attempts in controlling gantry cranes have used open-loop input shaping and closed-loop feedback of rope angle to suppress sway while keeping transfer times short."},
        {"url": "https://example.org/journals/motor-thermal",
         "content": "Repeated high-torque starts with heavy loads raise motor winding temperature; thermal protection then trips and stops the crane."},
    ],
    "crane overheating overload emergency stop causes": [
        {"url": "https://example.org/safety/overload-trips",
         "content": "Lifting above rated capacity raises current draw; overload relays and thermal cut-outs stop the hoist suddenly, which itself can start the load swinging."},
    ],
    "anti-sway control input shaping gantry crane": [
        {"url": "https://example.org/control/input-shaping",
         "content": "Input shaping convolves the operator command with impulses timed to the pendulum period so that the residual oscillation cancels at the target position."},
    ],
    "crane load monitoring safety interlock": [
        {"url": "https://example.org/safety/load-monitoring",
         "content": "Load cells in the hoist and rated-capacity limiters block lifts above the safe working load and reduce permitted speed for heavy loads."},
    ],
}

entries = []
turns = {}


def emit(agent, step, response, prompt, completion):
    key = (agent, step)
    turn = turns.get(key, 0)
    turns[key] = turn + 1
    response = dict(response)
    response["usage"] = {"prompt_tokens": prompt, "completion_tokens": completion}
    entries.append({"agent": agent, "step": step, "turn": turn, "response": response})


def route(step, content, prompt):
    emit(PM, step, {"content": content}, prompt, 12)


def answer(agent, step, text, prompt, completion):
    emit(agent, step, {"content": text}, prompt, completion)


def call(agent, step, calls, prompt):
    emit(agent, step, {"tool_calls": [
        {"id": cid, "name": name, "arguments": json.dumps(args)} for cid, name, args in calls
    ]}, prompt, 40 * len(calls))


def search(agent, step, cid, query, prompt):
    assert query in SEARCH, query
    call(agent, step, [(cid, "web_search", {"query": query})], prompt)


def documented(step, body, prompt):
    route(step, DOC, prompt)
    answer(DOC, step, body, prompt + 250, 650)
    route(step, "FINISH", prompt + 400)


# Step 1: Defining Engineering System
route(1, f"{ME}, please identify the elements of the gantry crane system and its supersystem.", 350)
search(ME, 1, "s1-me-1", "gantry crane main components trolley hoist girder", 475)
answer(ME, 1, "Engineering system: gantry crane with legs, rails, main girder, trolley, hoist, wire rope, hook block and drive motors with brakes. Supersystem: load, operator, rails, workers nearby, weather and dust. Main function: move the load to a target position quickly and safely.", 650, 420)
documented(1, "## Engineering system\n\nComponents: legs, rails, girder, trolley, hoist, wire rope, hook block, motors, brakes.\n\nSupersystem: load, operator, nearby workers, environment.\n\nProblem: fast transfer causes load swing; heavy lifts overheat drives and trigger sudden stops.", 750)

# Step 2: Function Analysis
route(2, ME, 975)
search(ME, 2, "s2-me-1", "gantry crane function analysis components functions", 1075)
answer(ME, 2, "Useful functions: rope holds load, trolley moves rope, motor drives trolley, brake stops trolley. Insufficient: brake stops load (load keeps swinging). Harmful: load swing strikes surroundings; overload heats motor.", 1300, 520)
route(2, CSE, 1450)
search(CSE, 2, "s2-cse-1", "gantry crane drive control speed profile sway", 1575)
answer(CSE, 2, "From the control side: the speed controller moves the trolley (useful, excessive at high speed), the operator sets the speed (insufficient feedback on sway), and thermal protection stops the motor (harmful side effect: sudden stop).", 1775, 480)
route(2, SE, 1900)
search(SE, 2, "s2-se-1", "gantry crane hazards swinging load overload", 2000)
answer(SE, 2, "Hazards: swinging load hits people and structures, overload causes structural fatigue, sudden stops throw the load. Existing safety functions are reactive.", 2175, 400)
documented(2, "## Function analysis\n\n| Carrier | Function | Object | Type |\n|---|---|---|---|\n| Rope | holds | Load | useful |\n| Trolley | moves | Rope | useful, excessive at speed |\n| Brake | stops | Load | insufficient |\n| Load | strikes | Surroundings | harmful |\n| Overload | heats | Motor | harmful |", 2300)

# Step 3: Cause and Effect Chain Analysis (CECA)
route(3, f"We are now moving to the cause and effect chain analysis. {CSE}, could you begin by exploring the control-related issues behind the swing and overheating?", 2450)
search(CSE, 3, "s3-cse-1", "control systems for gantry cranes excessive swinging overheating", 2575)
answer(CSE, 3, "Root causes of excessive swinging: abrupt acceleration profiles, no rope-angle feedback, operator-driven speed. Root causes of overheating: repeated high-torque starts with heavy loads, no load-dependent speed limit. Chain: heavy load and high speed -> high torque -> motor heat -> thermal trip -> sudden stop -> swing.", 2800, 700)
route(3, SE, 2975)
search(SE, 3, "s3-se-1", "crane overheating overload emergency stop causes", 3075)
answer(SE, 3, "Safety view: the sudden stop is both an effect of overheating and a cause of swing, so the two problems share one chain. Missing load monitoring lets operators exceed the rated load.", 3275, 450)
documented(3, "## Cause and effect chains\n\n1. High speed -> abrupt deceleration -> pendulum excitation -> excessive swing.\n2. Overload + high speed -> high motor torque -> overheating -> thermal trip -> sudden stop -> swing.\n\nKey disadvantages: swing at final position, overheating, sudden stops.", 3400)

# Step 4: Engineering Contradiction and Contradiction Matrix
route(4, TRIZ, 3550)
call(TRIZ, 4, [("s4-t-1", "triz_features_tool", {})], 3700)
call(TRIZ, 4, [
    ("s4-t-2", "contradiction_matrix_tool", {"improving": 9, "worsening": 13}),
    ("s4-t-3", "contradiction_matrix_tool", {"improving": "Speed", "worsening": "Temperature"}),
], 3975)
call(TRIZ, 4, [("s4-t-4", "inventive_principles_tool", {"ids": [28, 1, 18, 36]})], 4200)
answer(TRIZ, 4, "EC1: improving Speed (9) worsens Stability of the object's composition (13); matrix suggests 28, 33, 1, 18. EC2: improving Speed (9) worsens Temperature (17); matrix suggests 28, 30, 36, 2. Most promising: 28 Mechanics substitution (electronic sway control), 1 Segmentation (staged motion), 18 Mechanical vibration (tuned damping), 36 Phase transitions (thermal buffering).", 4475, 820)
documented(4, "## Engineering contradictions\n\n- EC1: Speed (9) vs Stability of the object's composition (13): principles 28, 33, 1, 18.\n- EC2: Speed (9) vs Temperature (17): principles 28, 30, 36, 2.\n\nSelected: 28, 1, 18, 36.", 4650)

# Step 5: Physical Contradiction
route(5, TRIZ, 4800)
answer(TRIZ, 5, "Physical contradiction: the trolley must move fast to shorten transfer time and must move slowly to avoid exciting the load. Separation in time: fast during the travel phase, slow and shaped near the target. Separation on condition: full speed for light loads, limited speed for heavy loads.", 5000, 600)
documented(5, "## Physical contradiction\n\nThe trolley speed must be high (productivity) and low (no swing, no overheating).\n\nSeparation in time: shaped acceleration and deceleration phases.\nSeparation on condition: load-dependent speed limits.", 5150)

# Step 6: Solutions
route(6, CSE, 5300)
search(CSE, 6, "s6-cse-1", "anti-sway control input shaping gantry crane", 5450)
answer(CSE, 6, "Solution 1 (principle 28): input-shaped speed commands plus rope-angle feedback so the load arrives without residual swing. Solution 2 (principle 1): split each move into acceleration, cruise and shaped braking segments. Solution 3 (principle 36): motor thermal model that lowers speed before the protection trips.", 5725, 760)
route(6, SE, 5875)
search(SE, 6, "s6-se-1", "crane load monitoring safety interlock", 6000)
answer(SE, 6, "The proposals reduce swing and avoid sudden stops. Add load cells and a rated-capacity limiter that blocks overloads and reduces speed for heavy loads; keep a manual emergency stop.", 6225, 430)
route(6, OS, 6350)
answer(OS, 6, "Operationally, automatic sway control shortens cycle times and lowers operator workload. Training is needed for the new limiter behaviour; maintenance should add load-cell calibration to the inspection plan.", 6500, 380)
documented(6, "## Solutions\n\n1. Anti-sway control with input shaping and rope-angle feedback (28).\n2. Segmented motion profile (1).\n3. Thermal model with predictive speed limiting (36).\n4. Load monitoring and rated-capacity limiter.\n\nReviewed for safety and operations.", 6650)

# Final report (keyed as step 0)
answer(DOC, 0, "# Gantry crane improvement\n\nThe crane swings at the target and overheats under heavy, fast lifts. The team traced both to high speed and overload, formulated Speed vs Stability and Speed vs Temperature contradictions, and applied principles 28, 1, 18 and 36. Proposed: anti-sway control, segmented motion, predictive thermal limiting and load monitoring.", 7500, 900)


def main():
    tool_calls = sum(len(e["response"].get("tool_calls", [])) for e in entries)
    total = sum(e["response"]["usage"]["prompt_tokens"] + e["response"]["usage"]["completion_tokens"] for e in entries)
    header = [
        "# Scripted gantry-crane run over the default team and the six-step workflow.",
        f"# {len(entries)} model calls, {tool_calls} tool calls, {total} tokens.",
        "# Generated by make_fixtures.py; edit that file instead.",
    ]
    lines = header + [json.dumps(e, ensure_ascii=False) for e in entries]
    (HERE / "full_run.script").write_text("\n".join(lines) + "\n")
    (HERE / "search.json").write_text(json.dumps(SEARCH, indent=2) + "\n")
    print(f"{len(entries)} entries, {tool_calls} tool calls, {len(entries) + tool_calls} node calls, {total} tokens")


if __name__ == "__main__":
    main()

from dataclasses import dataclass
from typing import Tuple


@dataclass(frozen=True)
class TaskSpec:
    name: str
    index: int
    classes: Tuple[str, ...]

    @property
    def num_classes(self) -> int:
        return len(self.classes)


# in causal order: traffic context, vehicle context, driver emotion, driver behavior
TASKS = (
    TaskSpec("tcr", 1, ("TrafficJam", "Waiting", "Smooth")),
    TaskSpec("vcr", 2, ("Parking", "Turning", "Backward", "LaneChange", "Forward")),
    TaskSpec("der", 3, ("Anxiety", "Peace", "Weariness", "Happiness", "Anger")),
    TaskSpec(
        "dbr",
        4,
        (
            "Smoking",
            "Phone",
            "LookAround",
            "DozingOff",
            "NormalDrive",
            "Talking",
            "BodyMove",
        ),
    ),
)

TASK_NAMES = tuple(task.name for task in TASKS)
NUM_CLASSES = {task.name: task.num_classes for task in TASKS}

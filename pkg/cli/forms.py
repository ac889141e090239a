"""Validation of merged run configurations (config file values + flags)."""

from django import forms

from evaluation.metrics import AP_MODES
from render.raster import SUN_MODELS
from worldgen.forms import ScenarioForm, errors_as_text
from worldgen.scenario import PRESETS, WEATHERS

SEED_MAX = (1 << 64) - 1
DEFAULT_PRESET = 'PE01'


def _choices(values):
    return [(v, v) for v in values]


class ResolutionField(forms.Field):
    """"640x480" or [640, 480]."""

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if isinstance(value, str):
            parts = value.lower().split('x')
        elif isinstance(value, (list, tuple)):
            parts = list(value)
        else:
            raise forms.ValidationError("resolution must look like 640x480")
        try:
            width, height = (int(p) for p in parts)
        except (TypeError, ValueError):
            raise forms.ValidationError("resolution must look like 640x480")
        if width < 16 or height < 16:
            raise forms.ValidationError("resolution must be at least 16x16")
        return width, height


class RatioField(forms.Field):
    """"3:1" or [3, 1]."""

    def to_python(self, value):
        if value in self.empty_values:
            return None
        parts = value.split(':') if isinstance(value, str) else value
        try:
            a, b = (int(p) for p in parts)
        except (TypeError, ValueError):
            raise forms.ValidationError("ratio must look like 3:1")
        if a < 1 or b < 1:
            raise forms.ValidationError("ratio parts must be at least 1")
        return a, b


class NameListField(forms.Field):
    """Comma separated string or a list of strings."""

    def to_python(self, value):
        if value in self.empty_values:
            return None
        if isinstance(value, str):
            value = value.split(',')
        if not isinstance(value, (list, tuple)):
            raise forms.ValidationError("expected a list of names")
        names = tuple(str(v).strip() for v in value)
        if not all(names):
            raise forms.ValidationError("names must not be empty")
        return names


class GenerateForm(forms.Form):
    out = forms.CharField()
    map = forms.CharField(required=False)
    preset = forms.ChoiceField(choices=_choices(PRESETS), required=False)
    scenario = forms.JSONField(required=False)
    seed = forms.IntegerField(required=False, min_value=0, max_value=SEED_MAX)
    frames = forms.IntegerField(required=False, min_value=1)
    resolution = ResolutionField(required=False)
    fov = forms.FloatField(required=False, min_value=1.0, max_value=179.0)
    height = forms.FloatField(required=False, min_value=0.1)
    weather = forms.ChoiceField(choices=_choices(WEATHERS), required=False)
    time_of_day = forms.FloatField(required=False, min_value=0.0)
    sun_model = forms.ChoiceField(choices=_choices(SUN_MODELS), required=False)
    # synthetic city size when no map is given
    blocks = forms.IntegerField(required=False, min_value=1, max_value=20)
    culling = forms.NullBooleanField(required=False)
    jobs = forms.IntegerField(required=False, min_value=1)
    bands = forms.IntegerField(required=False, min_value=1)

    def clean_time_of_day(self):
        value = self.cleaned_data.get('time_of_day')
        if value is not None and value >= 24:
            raise forms.ValidationError("time_of_day must be below 24")
        return value

    def clean_scenario(self):
        value = self.cleaned_data.get('scenario')
        if value is not None and not isinstance(value, dict):
            raise forms.ValidationError("scenario must be an object of scenario fields")
        return value

    def clean(self):
        cleaned = super().clean()
        if 'scenario' not in cleaned:
            return cleaned
        data = dict(cleaned.get('scenario') or {})
        if cleaned.get('preset'):
            data['preset'] = cleaned['preset']
        elif not data:
            data['preset'] = DEFAULT_PRESET
        scenario = ScenarioForm(data=data)
        if scenario.is_valid():
            cleaned['scenario'] = scenario.cleaned_data
        else:
            self.add_error('scenario', errors_as_text(scenario))
        return cleaned


class BenchForm(forms.Form):
    preset = forms.ChoiceField(choices=_choices(PRESETS), required=False)
    seed = forms.IntegerField(required=False, min_value=0, max_value=SEED_MAX)
    frames = forms.IntegerField(required=False, min_value=1)
    resolution = ResolutionField(required=False)
    blocks = forms.IntegerField(required=False, min_value=1, max_value=20)
    culling = forms.NullBooleanField(required=False)
    lod = forms.NullBooleanField(required=False)
    verify = forms.NullBooleanField(required=False)
    bands = forms.IntegerField(required=False, min_value=1)


class StatsForm(forms.Form):
    dataset = forms.CharField()


class FilterForm(forms.Form):
    dataset = forms.CharField()
    out = forms.CharField()
    min_area = forms.IntegerField(required=False, min_value=1)
    fully_visible = forms.NullBooleanField(required=False)

    def clean(self):
        cleaned = super().clean()
        if (cleaned.get('min_area') is None) == (not cleaned.get('fully_visible')):
            raise forms.ValidationError("give exactly one of min_area or fully_visible")
        return cleaned


class SplitForm(forms.Form):
    dataset = forms.CharField()
    out = forms.CharField()
    ratio = RatioField(required=False)
    seed = forms.IntegerField(required=False, min_value=0, max_value=SEED_MAX)
    names = NameListField(required=False)

    def clean_names(self):
        names = self.cleaned_data.get('names')
        if names is not None and (len(names) != 2 or names[0] == names[1]):
            raise forms.ValidationError("names must be two distinct split names")
        return names


class MixForm(forms.Form):
    datasets = NameListField()
    out = forms.CharField()
    namespaces = NameListField(required=False)

    def clean(self):
        cleaned = super().clean()
        datasets, namespaces = cleaned.get('datasets'), cleaned.get('namespaces')
        if datasets and namespaces and len(datasets) != len(namespaces):
            raise forms.ValidationError("give one namespace per dataset")
        return cleaned


class SampleForm(forms.Form):
    dataset = forms.CharField()
    out = forms.CharField()
    n = forms.IntegerField(min_value=0)
    seed = forms.IntegerField(required=False, min_value=0, max_value=SEED_MAX)


class EvalForm(forms.Form):
    dataset = forms.CharField(required=False)
    detections = forms.CharField(required=False)
    # AP values given directly instead of detections
    measured = forms.CharField(required=False)
    reference = forms.CharField(required=False)
    report = forms.CharField(required=False)
    iou_threshold = forms.FloatField(required=False)
    ap_mode = forms.ChoiceField(choices=_choices(AP_MODES), required=False)
    ignore_difficult = forms.NullBooleanField(required=False)
    classes = NameListField(required=False)

    def clean(self):
        cleaned = super().clean()
        detections, measured = cleaned.get('detections'), cleaned.get('measured')
        if bool(detections) == bool(measured):
            raise forms.ValidationError("give exactly one of detections or measured")
        if detections and not cleaned.get('dataset'):
            raise forms.ValidationError("evaluating detections needs the dataset")
        if measured and not cleaned.get('reference'):
            raise forms.ValidationError("measured AP values need a reference to compare with")
        return cleaned

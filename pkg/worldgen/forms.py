from django import forms

from .scenario import PRESETS, WEATHERS


def _number_list(value, name, minimum=None, maximum=None, length=None):
    if value is None:
        return None
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise forms.ValidationError(f"{name} must be a list of numbers")
    if length is not None and len(value) != length:
        raise forms.ValidationError(f"{name} must have {length} entries")
    for v in value:
        if minimum is not None and v < minimum:
            raise forms.ValidationError(f"{name} entries must be >= {minimum}")
        if maximum is not None and v >= maximum:
            raise forms.ValidationError(f"{name} entries must be < {maximum}")
    return [float(v) for v in value]


class ScenarioForm(forms.Form):
    """Scenario config: a preset name and/or explicit preset and rig fields."""

    preset = forms.ChoiceField(choices=[(name, name) for name in PRESETS], required=False)
    yaw_offsets = forms.JSONField(required=False)
    traffic_density = forms.ChoiceField(choices=[('sparse', 'sparse'), ('dense', 'dense')], required=False)
    per_frame_color_change = forms.NullBooleanField(required=False)
    rotate_vehicles = forms.NullBooleanField(required=False)
    draw_distance = forms.FloatField(required=False, min_value=1.0)
    weathers = forms.JSONField(required=False)
    times_of_day = forms.JSONField(required=False)
    heights = forms.JSONField(required=False)
    fovs = forms.JSONField(required=False)

    # camera rig
    camera_height = forms.FloatField(required=False, min_value=0.1)
    fov_h = forms.FloatField(required=False, min_value=1.0, max_value=179.0)
    resolution = forms.JSONField(required=False)

    def clean_yaw_offsets(self):
        return _number_list(self.cleaned_data.get('yaw_offsets'), 'yaw_offsets', -360, 360)

    def clean_times_of_day(self):
        return _number_list(self.cleaned_data.get('times_of_day'), 'times_of_day', 0, 24)

    def clean_heights(self):
        return _number_list(self.cleaned_data.get('heights'), 'heights', 0.1)

    def clean_fovs(self):
        return _number_list(self.cleaned_data.get('fovs'), 'fovs', 1, 180)

    def clean_weathers(self):
        value = self.cleaned_data.get('weathers')
        if value is None:
            return None
        if not isinstance(value, list) or any(w not in WEATHERS for w in value):
            raise forms.ValidationError(f"weathers must be a list drawn from {', '.join(WEATHERS)}")
        return value

    def clean_resolution(self):
        value = _number_list(self.cleaned_data.get('resolution'), 'resolution', 16, length=2)
        return None if value is None else (int(value[0]), int(value[1]))

    def clean(self):
        cleaned = super().clean()
        if not cleaned.get('preset') and cleaned.get('yaw_offsets') is None:
            raise forms.ValidationError("give a preset or an explicit yaw_offsets list")
        return cleaned


def errors_as_text(form):
    return '; '.join(
        f"{field}: {' '.join(messages)}" if field != '__all__' else ' '.join(messages)
        for field, messages in form.errors.items()
    )
